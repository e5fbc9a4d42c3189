"""End-to-end experiment harness: simulate a spatial dataset, tune each
sampler to the target acceptance band, run the chains, and write comparison
tables plus a reproducibility manifest.

The default experiment matches the package's reference setup: sites uniform
on the unit square, a Gaussian field with exponential correlation (sill 1,
range 0.5) and a two-level mean surface (+1.7 on the left half, -1.7 on the
right), binomial counts with 50 trials per site, and chains monitored at the
sites nearest (0,0), (0.1,0.5), (1,1). A desk-scale profile (m=50, 20k
iterations) keeps full comparisons under a few minutes; the paper-scale
profile (m=350, 150k iterations) reproduces the full study and takes hours.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial.distance import cdist

from . import __version__
from .covariance import CovarianceModel, SiteSet, SpdMatrix, build_covariance, sample_field
from .diagnostics import DiagnosticsReport, MpsrfTrajectory, diagnostics_report, mpsrf
from .glmm import GlmmSpec, simulate_data
from .samplers import (
    ADJUSTED_ALGORITHMS,
    ALGORITHMS,
    PRECONDITIONER_KINDS,
    SamplerConfig,
    resolve_preconditioner,
    run_chain,
    tune_step_size,
)
from .traceio import save_trace

__all__ = [
    "ComparisonResult",
    "Dataset",
    "ExperimentConfig",
    "build_start_set",
    "parse_roster_entry",
    "run_comparison",
    "simulate_dataset",
]

DESK_ROSTER = (
    "pcmala:identity",
    "pcmala:prior_cov",
    "pcmala:diag_mode_info_inv",
    "pcmala:mode_info_inv",
    "pmala",
)

PAPER_ROSTER = (
    "rwm:identity",
    "rwm:prior_cov",
    "rwm:diag_mode_info_inv",
    "rwm:mode_info_inv",
    "pcmala:identity",
    "pcmala:prior_cov",
    "pcmala:diag_mode_info_inv",
    "pcmala:mode_info_inv",
    "pmala",
    "pcula:identity",
    "pcula:prior_cov",
    "pcula:diag_mode_info_inv",
    "pcula:mode_info_inv",
)


def parse_roster_entry(entry: str) -> tuple[str, str]:
    """Split an ``algorithm[:preconditioner]`` roster string."""
    algorithm, _, kind = entry.partition(":")
    if algorithm in ("pmala", "mmala"):
        kind = kind or "position_dependent"
    elif not kind:
        raise ValueError(f"roster entry {entry!r} needs a preconditioner kind")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm in roster entry {entry!r}")
    if kind not in PRECONDITIONER_KINDS:
        raise ValueError(f"unknown preconditioner in roster entry {entry!r}")
    return algorithm, kind


@dataclass
class ExperimentConfig:
    """Declarative description of one comparison experiment."""

    family: str = "binomial_logit"
    grid: int = 21
    m: int = 350
    trials: int = 50
    mean_left: float = 1.7
    mean_right: float = -1.7
    covariance: CovarianceModel = field(default_factory=CovarianceModel)
    iterations: int = 150_000
    band: tuple[float, float] = (0.60, 0.70)
    seed: int = 20_240_817
    algorithms: tuple[str, ...] = PAPER_ROSTER
    start_count: int = 5
    pilot_iterations: int = 2000
    initial_h: float = 1.0
    checkpoint_count: int = 25
    monitor_points: tuple[tuple[float, float], ...] = ((0.0, 0.0), (0.1, 0.5), (1.0, 1.0))
    burn_in: int = 0
    max_lag: int = 50
    save_trace_csv: bool = False

    def __post_init__(self):
        if self.m < 1 or self.grid < 2:
            raise ValueError("need at least one site and a 2x2 grid")
        if self.iterations < 2:
            raise ValueError("need at least two iterations")
        if not (1 <= self.start_count <= 5):
            raise ValueError("start_count must be between 1 and 5")
        if self.burn_in < 0 or self.burn_in >= self.iterations:
            raise ValueError("burn_in must be inside the run length")
        for entry in self.algorithms:
            parse_roster_entry(entry)
        self.band = (float(self.band[0]), float(self.band[1]))
        self.algorithms = tuple(self.algorithms)
        self.monitor_points = tuple((float(a), float(b)) for a, b in self.monitor_points)

    @classmethod
    def desk_profile(cls, **overrides: Any) -> "ExperimentConfig":
        """Small instance of the same design: m=50 sites, 20k iterations,
        three starts, Langevin roster only."""
        defaults: dict[str, Any] = dict(
            m=50,
            iterations=20_000,
            start_count=3,
            algorithms=DESK_ROSTER,
        )
        defaults.update(overrides)
        return cls(**defaults)

    @classmethod
    def paper_profile(cls, **overrides: Any) -> "ExperimentConfig":
        """Full-size design: m=350 sites, 150k iterations, five starts."""
        return cls(**overrides)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["covariance"] = dataclasses.asdict(self.covariance)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        cov = data.get("covariance")
        if isinstance(cov, dict):
            data["covariance"] = CovarianceModel(**cov)
        for key in ("band", "algorithms"):
            if key in data and isinstance(data[key], list):
                data[key] = tuple(data[key])
        if "monitor_points" in data:
            data["monitor_points"] = tuple(tuple(p) for p in data["monitor_points"])
        return cls(**data)


@dataclass
class Dataset:
    """One simulated realization of the spatial design."""

    sites: SiteSet
    grid_coords: np.ndarray
    field_on_grid: np.ndarray
    x_true: np.ndarray
    z: np.ndarray
    spec: GlmmSpec

    @property
    def m(self) -> int:
        return len(self.sites)


def _mean_surface(coords: np.ndarray, config: ExperimentConfig) -> np.ndarray:
    return np.where(coords[:, 0] < 0.5, config.mean_left, config.mean_right)


def simulate_dataset(config: ExperimentConfig, rng: np.random.Generator) -> Dataset:
    """Draw sites, the latent field, and counts for one experiment.

    The field is a single joint Gaussian draw over the prediction grid and
    the sites, so the grid surface and the site values come from the same
    realization. The sampling target's prior covariance is the site block of
    the same model.
    """
    sites_xy = rng.uniform(size=(config.m, 2))
    axis = np.linspace(0.0, 1.0, config.grid)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    grid_coords = np.column_stack([gx.ravel(), gy.ravel()])
    all_coords = np.vstack([grid_coords, sites_xy])
    cov_all = build_covariance(SiteSet(all_coords), config.covariance)
    mean_all = _mean_surface(all_coords, config)
    field = sample_field(mean_all, cov_all, rng)
    n_grid = grid_coords.shape[0]
    x_true = field[n_grid:]
    trials = None
    if config.family == "binomial_logit":
        trials = np.full(config.m, config.trials, dtype=np.int64)
    z = simulate_data(config.family, x_true, rng, trials=trials)
    sites = SiteSet(sites_xy)
    spec = GlmmSpec(
        family=config.family,
        z=z,
        prior_mean=_mean_surface(sites_xy, config),
        prior_cov=build_covariance(sites, config.covariance),
        trials=trials,
    )
    return Dataset(
        sites=sites,
        grid_coords=grid_coords,
        field_on_grid=field[:n_grid],
        x_true=x_true,
        z=z,
        spec=spec,
    )


def build_start_set(x_true: np.ndarray, count: int = 5) -> list[np.ndarray]:
    """Overdispersed starting points: the truth, its reflection, zero, and
    the truth shifted by +-1, truncated to `count`."""
    starts = [
        x_true.copy(),
        -x_true,
        np.zeros_like(x_true),
        x_true + 1.0,
        x_true - 1.0,
    ]
    if not (1 <= count <= len(starts)):
        raise ValueError(f"count must be in 1..{len(starts)}")
    return starts[:count]


def monitored_site_indices(config: ExperimentConfig, sites: SiteSet) -> list[int]:
    """Index of the site nearest each configured monitor point."""
    d = cdist(np.asarray(config.monitor_points, dtype=float), sites.coords)
    return [int(j) for j in d.argmin(axis=1)]


def _derive_seed(entropy: int, *key: int) -> int:
    """64-bit integer seed from a named spawn of the master seed."""
    child = np.random.SeedSequence(entropy=entropy, spawn_key=tuple(key))
    return int.from_bytes(child.generate_state(2, np.uint32).tobytes(), "little")


# Spawn-key namespaces for the named random streams.
_KEY_DATASET = 0
_KEY_TUNE = 1
_KEY_MAIN = 2
_KEY_START = 3


def dataset_rng(config: ExperimentConfig) -> np.random.Generator:
    """The dataset stream for a config; every entry point shares it so the
    same master seed always means the same simulated data."""
    return np.random.default_rng(_derive_seed(config.seed, _KEY_DATASET))


@dataclass
class AlgorithmResult:
    """Everything recorded for one roster entry."""

    tag: str
    algorithm: str
    preconditioner: str
    step_size: float | None = None
    acceptance_rate: float | None = None
    wall_time: float | None = None
    report: DiagnosticsReport | None = None
    rhat: MpsrfTrajectory | None = None
    trace_file: str | None = None
    error: str | None = None


@dataclass
class ComparisonResult:
    config: ExperimentConfig
    dataset: Dataset
    monitored: list[int]
    results: list[AlgorithmResult]
    manifest: dict
    out_dir: Path


def run_comparison(config: ExperimentConfig, out_dir: str | Path) -> ComparisonResult:
    """Run the full roster on one simulated dataset and write the bundle.

    Step sizes for accept-reject kernels are tuned to the configured
    acceptance band; an unadjusted (pcula) entry inherits the tuned step size
    of the pcmala entry with the same preconditioner when one is in the
    roster, and is tuned through a pcmala surrogate otherwise. A failure in
    one roster entry is recorded and does not stop the others.

    Writes ``manifest.json``, ``comparison.csv``, ``acf.csv``, ``mpsrf.csv``
    and per-entry traces under ``traces/``.
    """
    out_dir = Path(out_dir)
    (out_dir / "traces").mkdir(parents=True, exist_ok=True)
    dataset = simulate_dataset(config, dataset_rng(config))
    target = dataset.spec
    monitored = monitored_site_indices(config, dataset.sites)
    starts = build_start_set(dataset.x_true, config.start_count)
    checkpoints = _checkpoint_grid(config, target.dim)

    preconditioners: dict[str, SpdMatrix | None] = {}
    tuned_pcmala: dict[str, float] = {}
    results: list[AlgorithmResult] = []
    for index, entry in enumerate(config.algorithms):
        algorithm, kind = parse_roster_entry(entry)
        result = AlgorithmResult(tag=entry.replace(":", "-"), algorithm=algorithm, preconditioner=kind)
        results.append(result)
        try:
            if kind not in preconditioners:
                preconditioners[kind] = resolve_preconditioner(target, kind)
            g = preconditioners[kind]
            template = SamplerConfig(
                algorithm=algorithm,
                step_size=config.initial_h,
                seed=_derive_seed(config.seed, _KEY_TUNE, index),
                initial_state=dataset.x_true,
                preconditioner=kind,
            )
            if algorithm in ADJUSTED_ALGORITHMS:
                h = tune_step_size(
                    template,
                    target,
                    band=config.band,
                    pilot_iterations=config.pilot_iterations,
                    preconditioner=g,
                )
            else:
                h = _step_size_for_unadjusted(
                    kind, tuned_pcmala, config, target, dataset, index, g
                )
            if algorithm == "pcmala":
                tuned_pcmala[kind] = h
            result.step_size = h

            main_config = SamplerConfig(
                algorithm=algorithm,
                step_size=h,
                seed=_derive_seed(config.seed, _KEY_MAIN, index),
                initial_state=dataset.x_true,
                preconditioner=kind,
            )
            trace = run_chain(main_config, target, config.iterations, preconditioner=g)
            result.acceptance_rate = trace.acceptance_rate
            result.wall_time = trace.wall_time
            result.report = diagnostics_report(
                trace.states[config.burn_in :],
                wall_time=trace.wall_time,
                monitored=monitored,
                max_lag=config.max_lag,
                include_ess=algorithm in ADJUSTED_ALGORITHMS,
            )
            if config.start_count >= 2:
                chains = [trace.states]
                for start_index, start in enumerate(starts[1:], start=1):
                    start_config = dataclasses.replace(
                        main_config,
                        initial_state=start,
                        seed=_derive_seed(config.seed, _KEY_START, index, start_index),
                    )
                    extra = run_chain(start_config, target, config.iterations, preconditioner=g)
                    chains.append(extra.states)
                result.rhat = mpsrf(chains, checkpoints)
            trace_path = out_dir / "traces" / f"{result.tag}.npz"
            save_trace(trace, trace_path)
            if config.save_trace_csv:
                save_trace(trace, trace_path.with_suffix(".csv"))
            result.trace_file = str(trace_path.relative_to(out_dir))
        except Exception as exc:  # noqa: BLE001 - isolate roster entries
            result.error = f"{type(exc).__name__}: {exc}"
    manifest = _build_manifest(config, dataset, monitored, results)
    _write_bundle(out_dir, config, results, manifest)
    return ComparisonResult(
        config=config,
        dataset=dataset,
        monitored=monitored,
        results=results,
        manifest=manifest,
        out_dir=out_dir,
    )


def _checkpoint_grid(config: ExperimentConfig, dim: int) -> list[int]:
    n = config.iterations
    first = max(dim // max(1, config.start_count) + 2, n // config.checkpoint_count, 10)
    grid = np.unique(np.linspace(first, n, config.checkpoint_count).astype(int))
    return [int(k) for k in grid if k >= 2]


def _step_size_for_unadjusted(
    kind: str,
    tuned_pcmala: dict[str, float],
    config: ExperimentConfig,
    target,
    dataset: Dataset,
    index: int,
    g: SpdMatrix | None,
) -> float:
    if kind in tuned_pcmala:
        return tuned_pcmala[kind]
    surrogate = SamplerConfig(
        algorithm="pcmala",
        step_size=config.initial_h,
        seed=_derive_seed(config.seed, _KEY_TUNE, index),
        initial_state=dataset.x_true,
        preconditioner=kind,
    )
    h = tune_step_size(
        surrogate,
        target,
        band=config.band,
        pilot_iterations=config.pilot_iterations,
        preconditioner=g,
    )
    tuned_pcmala[kind] = h
    return h


def _build_manifest(
    config: ExperimentConfig,
    dataset: Dataset,
    monitored: list[int],
    results: list[AlgorithmResult],
) -> dict:
    import numpy
    import scipy

    entries = []
    for index, result in enumerate(results):
        entries.append(
            {
                "tag": result.tag,
                "algorithm": result.algorithm,
                "preconditioner": result.preconditioner,
                "step_size": result.step_size,
                "acceptance_rate": result.acceptance_rate,
                "wall_time": result.wall_time,
                "trace_file": result.trace_file,
                "status": "error" if result.error else "ok",
                "error": result.error,
                "seed_keys": {
                    "tune": [_KEY_TUNE, index],
                    "main": [_KEY_MAIN, index],
                    "starts": [
                        [_KEY_START, index, j] for j in range(1, config.start_count)
                    ],
                },
            }
        )
    return {
        "package_version": __version__,
        "numpy_version": numpy.__version__,
        "scipy_version": scipy.__version__,
        "config": config.to_dict(),
        "seed_derivation": (
            "seed(key...) = SeedSequence(entropy=config.seed, spawn_key=key)"
            ".generate_state(2, uint32) as little-endian 64-bit int"
        ),
        "dataset_seed_key": [_KEY_DATASET],
        "monitored_sites": monitored,
        "monitored_coords": dataset.sites.coords[monitored].tolist(),
        "algorithms": entries,
    }


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_bundle(
    out_dir: Path,
    config: ExperimentConfig,
    results: list[AlgorithmResult],
    manifest: dict,
) -> None:
    import csv

    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    with open(out_dir / "comparison.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["algorithm", "preconditioner", "step_size", "acceptance_rate"]
        header += [f"ess_{i + 1}" for i in range(len(config.monitor_points))]
        header += [f"ess_per_min_{i + 1}" for i in range(len(config.monitor_points))]
        header += ["mess", "msjd", "wall_s", "status"]
        writer.writerow(header)
        for result in results:
            row = [
                result.algorithm,
                result.preconditioner,
                _fmt(result.step_size),
                _fmt(result.acceptance_rate),
            ]
            report = result.report
            monitored = report.monitored if report else []
            for slot in range(len(config.monitor_points)):
                if report and report.ess_values is not None and slot < len(monitored):
                    row.append(_fmt(report.ess_values[monitored[slot]]))
                else:
                    row.append("")
            for slot in range(len(config.monitor_points)):
                if report and report.ess_per_minute is not None and slot < len(monitored):
                    row.append(_fmt(report.ess_per_minute[monitored[slot]]))
                else:
                    row.append("")
            row.append(_fmt(report.mess_value if report else None))
            row.append(_fmt(report.msjd_value if report else None))
            row.append(_fmt(result.wall_time))
            row.append("error" if result.error else "ok")
            writer.writerow(row)

    with open(out_dir / "acf.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "preconditioner", "coordinate", "lag", "acf"])
        for result in results:
            if result.report is None:
                continue
            for coord, values in result.report.acf_values.items():
                for lag, value in enumerate(values):
                    writer.writerow(
                        [result.algorithm, result.preconditioner, coord, lag, _fmt(float(value))]
                    )

    with open(out_dir / "mpsrf.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "preconditioner", "iteration", "mpsrf"])
        for result in results:
            if result.rhat is None:
                continue
            for k, value in zip(result.rhat.iterations, result.rhat.values):
                writer.writerow(
                    [result.algorithm, result.preconditioner, int(k), _fmt(float(value))]
                )
