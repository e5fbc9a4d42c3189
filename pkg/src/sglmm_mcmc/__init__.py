"""MCMC for spatial GLMM latent fields: preconditioned and position-dependent
Langevin samplers, geometric-ergodicity checks, and output diagnostics."""

__version__ = "0.1.0"

from .covariance import (
    CovarianceModel,
    FactorizationError,
    SiteSet,
    SpdMatrix,
    build_covariance,
    correlation,
    sample_field,
)
from .diagnostics import (
    DiagnosticsReport,
    MpsrfTrajectory,
    acf,
    diagnostics_report,
    ess,
    mess,
    mpsrf,
    msjd,
)
from .ergodicity import (
    DriftSpec,
    ErgodicityReport,
    a4_ray_probe,
    a4_threshold,
    a5_ray_probe,
    a5_threshold,
    c2,
    drift_ratio,
    log_c2,
    mmala_h_bound,
    non_ge_drift_check,
    pcmala_h_bound,
    pcula_spectral_check,
)
from .glmm import (
    GlmmSpec,
    LocalGeometry,
    gamma_from_geometry,
    omega_from_geometry,
    simulate_data,
)
from .harness import (
    ComparisonResult,
    Dataset,
    ExperimentConfig,
    build_start_set,
    dataset_rng,
    run_comparison,
    simulate_dataset,
)
from .samplers import (
    ChainState,
    ChainTrace,
    Kernel,
    Proposal,
    SamplerConfig,
    SamplerError,
    TuningError,
    log_proposal_density,
    resolve_preconditioner,
    run_chain,
    tune_step_size,
)
from .targets import FlatTarget, GaussianTarget, Target
from .traceio import load_trace, save_trace

__all__ = [
    "ChainState",
    "ChainTrace",
    "ComparisonResult",
    "CovarianceModel",
    "Dataset",
    "DiagnosticsReport",
    "DriftSpec",
    "ErgodicityReport",
    "ExperimentConfig",
    "FactorizationError",
    "FlatTarget",
    "GaussianTarget",
    "GlmmSpec",
    "Kernel",
    "LocalGeometry",
    "MpsrfTrajectory",
    "Proposal",
    "SamplerConfig",
    "SamplerError",
    "SiteSet",
    "SpdMatrix",
    "Target",
    "TuningError",
    "acf",
    "a4_ray_probe",
    "a4_threshold",
    "a5_ray_probe",
    "a5_threshold",
    "build_covariance",
    "build_start_set",
    "dataset_rng",
    "c2",
    "correlation",
    "diagnostics_report",
    "drift_ratio",
    "ess",
    "gamma_from_geometry",
    "load_trace",
    "log_c2",
    "log_proposal_density",
    "mess",
    "mmala_h_bound",
    "mpsrf",
    "msjd",
    "non_ge_drift_check",
    "omega_from_geometry",
    "pcmala_h_bound",
    "pcula_spectral_check",
    "resolve_preconditioner",
    "run_chain",
    "run_comparison",
    "sample_field",
    "save_trace",
    "simulate_data",
    "simulate_dataset",
    "tune_step_size",
]
