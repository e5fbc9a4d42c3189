"""Metropolis-Hastings and unadjusted Langevin kernels with Gaussian proposals.

Every kernel here proposes from N(c(x), h G(x)) and differs only in the mean
map c and in whether G moves with the state:

* ``rwm``     c(x) = x, fixed G
* ``pcmala``  c(x) = x + (h/2) G grad log f(x), fixed G
* ``pcula``   same mean, fixed G, no accept-reject step
* ``pmala``   c(x) = x + (h/2) G(x) grad log f(x) + (h/2) Gamma(x),
              G(x) the inverse of the negative Hessian
* ``mmala``   c(x) = x + (h/2) G(x) grad log f*(x) + (h/2) Omega(x) with
              log f* = log f - (1/2) log det I(x), same G(x)

The adjusted kernels accept with probability
1 ∧ f(y) q(y, x) / (f(x) q(x, y)); the proposal log densities are always
evaluated exactly, including the determinant term, so position-dependent G
needs no special casing in the ratio. Per step there is exactly one fresh
geometry evaluation (at the proposal); an accepted proposal's geometry is
carried over as the next state's cache.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, replace
from typing import IO

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .covariance import SpdMatrix
from .glmm import gamma_from_geometry, omega_from_geometry
from .targets import Target

__all__ = [
    "ADJUSTED_ALGORITHMS",
    "ALGORITHMS",
    "ChainState",
    "ChainTrace",
    "Kernel",
    "PRECONDITIONER_KINDS",
    "Proposal",
    "SamplerConfig",
    "SamplerError",
    "TuningError",
    "log_proposal_density",
    "resolve_preconditioner",
    "run_chain",
    "tune_step_size",
]

ALGORITHMS = ("rwm", "pcmala", "pmala", "mmala", "pcula")
ADJUSTED_ALGORITHMS = ("rwm", "pcmala", "pmala", "mmala")
POSITION_DEPENDENT = ("pmala", "mmala")
PRECONDITIONER_KINDS = (
    "identity",
    "prior_cov",
    "diag_mode_info_inv",
    "mode_info_inv",
    "position_dependent",
)

_LOG_2PI = math.log(2.0 * math.pi)


class SamplerError(RuntimeError):
    """A chain aborted mid-run; carries the completed prefix for diagnosis."""

    def __init__(self, message: str, iteration: int, partial: "ChainTrace"):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration
        self.partial = partial


class TuningError(RuntimeError):
    """Step-size search exhausted its trial budget; carries the history."""

    def __init__(self, message: str, history: list[tuple[float, float]]):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class SamplerConfig:
    """Everything needed to reproduce one chain.

    ``preconditioner`` names how the fixed G is built from the target
    (ignored with a warning-free override when an explicit matrix is handed
    to the kernel). Position-dependent algorithms must use, and default to,
    the ``position_dependent`` kind.
    """

    algorithm: str
    step_size: float
    seed: int
    initial_state: np.ndarray
    preconditioner: str = "identity"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.preconditioner not in PRECONDITIONER_KINDS:
            raise ValueError(f"unknown preconditioner kind {self.preconditioner!r}")
        if not (self.step_size > 0.0 and np.isfinite(self.step_size)):
            raise ValueError("step_size must be positive and finite")
        pd = self.preconditioner == "position_dependent"
        if pd != (self.algorithm in POSITION_DEPENDENT):
            raise ValueError(
                "position_dependent preconditioning applies exactly to pmala/mmala"
            )
        x0 = np.asarray(self.initial_state, dtype=float)
        if x0.ndim != 1 or not np.isfinite(x0).all():
            raise ValueError("initial_state must be a finite vector")
        object.__setattr__(self, "initial_state", x0)

    @property
    def adjusted(self) -> bool:
        return self.algorithm in ADJUSTED_ALGORITHMS


@dataclass(frozen=True)
class Proposal:
    """Parameters of one Gaussian proposal N(mean, h G): the mean, the lower
    Cholesky factor of h G, and log det(h G)."""

    mean: np.ndarray
    chol: np.ndarray
    log_det: float


@dataclass(frozen=True)
class ChainState:
    """Current point with its cached log density and outgoing proposal."""

    x: np.ndarray
    log_target: float
    proposal: Proposal


@dataclass
class ChainTrace:
    """States of one run, row per iteration, plus acceptance flags and timing.

    ``accepted`` has one entry per transition (length n-1) and is None for
    unadjusted kernels.
    """

    states: np.ndarray
    accepted: np.ndarray | None
    wall_time: float
    step_size: float | None = None
    algorithm: str | None = None

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def acceptance_rate(self) -> float | None:
        if self.accepted is None:
            return None
        return float(np.mean(self.accepted))


def log_proposal_density(params: Proposal, to: np.ndarray) -> float:
    """Exact log N(mean, h G) density at `to`, determinant term included."""
    r = np.asarray(to, dtype=float) - params.mean
    z = solve_triangular(params.chol, r, lower=True, check_finite=False)
    return -0.5 * (r.size * _LOG_2PI + params.log_det + float(z @ z))


def resolve_preconditioner(target: Target, kind: str) -> SpdMatrix | None:
    """Build the fixed preconditioner named by `kind` from the target.

    Returns None for ``position_dependent`` (the kernel recomputes G at every
    state). The mode-based kinds locate the mode and invert the negative
    Hessian there; ``diag_mode_info_inv`` keeps only the diagonal of that
    inverse.
    """
    if kind == "position_dependent":
        return None
    if kind == "identity":
        return SpdMatrix.identity(target.dim)
    if kind == "prior_cov":
        cov = getattr(target, "prior_cov", None)
        if cov is None:
            raise ValueError("target does not expose a prior covariance")
        return cov
    if kind in ("diag_mode_info_inv", "mode_info_inv"):
        mode = target.find_mode()
        info = target.neg_hessian(mode)
        chol = np.linalg.cholesky(info)
        inv = cho_solve((chol, True), np.eye(target.dim), check_finite=False)
        if kind == "diag_mode_info_inv":
            return SpdMatrix.from_diagonal(np.diag(inv))
        return SpdMatrix.from_matrix(0.5 * (inv + inv.T))
    raise ValueError(f"unknown preconditioner kind {kind!r}")


class Kernel:
    """One transition kernel bound to a target and a config.

    For fixed-G algorithms the factor of h G is computed once. For
    pmala/mmala each proposal evaluation factors the negative Hessian, forms
    its dense inverse (needed by the drift corrections anyway), and Choleskys
    that inverse; the same happens at the proposed point for the reverse
    density, so the per-step cost is one full geometry evaluation.
    """

    def __init__(
        self,
        target: Target,
        config: SamplerConfig,
        preconditioner: SpdMatrix | None = None,
    ):
        self.target = target
        self.config = config
        self.h = float(config.step_size)
        self.dim = target.dim
        if config.initial_state.shape != (self.dim,):
            raise ValueError("initial state dimension does not match target")
        self.position_dependent = config.algorithm in POSITION_DEPENDENT
        if self.position_dependent:
            for needed in ("neg_hessian", "third_diag"):
                if not hasattr(target, needed):
                    raise ValueError(f"{config.algorithm} needs target.{needed}")
            self._g = None
        else:
            g = preconditioner or resolve_preconditioner(target, config.preconditioner)
            if g.dim != self.dim:
                raise ValueError("preconditioner dimension does not match target")
            self._g = g.matrix
            self._chol_hg = math.sqrt(self.h) * g.chol
            self._log_det_hg = self.dim * math.log(self.h) + g.log_det()

    # -- state construction ------------------------------------------------

    def state_at(self, x: np.ndarray) -> ChainState:
        x = np.asarray(x, dtype=float)
        value = self.target.log_target(x)
        if self.config.adjusted and not np.isfinite(value):
            raise ValueError("log target is not finite at the given state")
        return ChainState(x=x, log_target=value, proposal=self._proposal(x))

    def _proposal(self, x: np.ndarray) -> Proposal:
        algo = self.config.algorithm
        if algo == "rwm":
            return Proposal(mean=x, chol=self._chol_hg, log_det=self._log_det_hg)
        if not self.position_dependent:
            drift = 0.5 * self.h * (self._g @ self.target.grad_log_target(x))
            return Proposal(mean=x + drift, chol=self._chol_hg, log_det=self._log_det_hg)
        info = self.target.neg_hessian(x)
        info_chol = np.linalg.cholesky(info)
        g = cho_solve((info_chol, True), np.eye(self.dim), check_finite=False)
        g = 0.5 * (g + g.T)
        third = self.target.third_diag(x)
        grad = self.target.grad_log_target(x)
        if algo == "pmala":
            drift = 0.5 * self.h * (g @ grad + gamma_from_geometry(g, third))
        else:  # mmala
            d_info = -third
            grad_log_det = np.diag(g) * d_info
            grad_star = grad - 0.5 * grad_log_det
            drift = 0.5 * self.h * (g @ grad_star + omega_from_geometry(g, third))
        chol_g = np.linalg.cholesky(g)
        chol_hg = math.sqrt(self.h) * chol_g
        log_det = self.dim * math.log(self.h) + 2.0 * float(
            np.sum(np.log(np.diag(chol_g)))
        )
        return Proposal(mean=x + drift, chol=chol_hg, log_det=log_det)

    # -- single transitions -------------------------------------------------

    def step(self, state: ChainState, rng: np.random.Generator):
        """One transition. Returns (next state, accepted flag or None).

        Draw order is fixed (proposal normals, then one uniform for adjusted
        kernels) so identically seeded runs are reproducible.
        """
        eps = rng.standard_normal(self.dim)
        y = state.proposal.mean + state.proposal.chol @ eps
        if self.config.algorithm == "pcula":
            # Unadjusted: f is never evaluated, only its gradient.
            return ChainState(x=y, log_target=math.nan, proposal=self._proposal(y)), None
        log_f_y = self.target.log_target(y)
        if self.config.algorithm == "rwm":
            # Symmetric proposal: the q ratio cancels exactly.
            log_alpha = min(0.0, log_f_y - state.log_target)
            proposal_y = None
        else:
            proposal_y = self._proposal(y)
            log_q_xy = -0.5 * (
                self.dim * _LOG_2PI + state.proposal.log_det + float(eps @ eps)
            )
            log_q_yx = log_proposal_density(proposal_y, state.x)
            log_alpha = min(
                0.0, log_f_y + log_q_yx - state.log_target - log_q_xy
            )
        u = rng.random()
        if u < math.exp(log_alpha):
            if proposal_y is None:
                proposal_y = self._proposal(y)
            return ChainState(x=y, log_target=log_f_y, proposal=proposal_y), True
        return state, False

    def log_accept(self, x: np.ndarray, y: np.ndarray) -> float:
        """log alpha(x, y) recomputed from scratch (testing/diagnostic path)."""
        if self.config.algorithm == "pcula":
            return 0.0
        state = self.state_at(x)
        log_f_y = self.target.log_target(y)
        if self.config.algorithm == "rwm":
            return min(0.0, log_f_y - state.log_target)
        log_q_xy = log_proposal_density(state.proposal, y)
        log_q_yx = log_proposal_density(self._proposal(np.asarray(y, float)), x)
        return min(0.0, log_f_y + log_q_yx - state.log_target - log_q_xy)

    # -- batched proposals (Monte Carlo drift estimation) -------------------

    def propose_batch(self, x: np.ndarray, n: int, rng: np.random.Generator):
        """n proposals from x with their log acceptance probabilities.

        Fixed-G kernels on targets exposing the ``*_many`` batch evaluators
        run fully vectorized; everything else falls back to a per-proposal
        loop (position-dependent geometry cannot be batched).
        """
        state = self.state_at(np.asarray(x, dtype=float))
        eps = rng.standard_normal((n, self.dim))
        ys = state.proposal.mean + eps @ state.proposal.chol.T
        if self.config.algorithm == "pcula":
            return ys, np.zeros(n)
        batchable = (
            not self.position_dependent
            and hasattr(self.target, "log_target_many")
            and hasattr(self.target, "grad_log_target_many")
        )
        if self.config.algorithm == "rwm" and hasattr(self.target, "log_target_many"):
            log_f_y = self.target.log_target_many(ys)
            return ys, np.minimum(0.0, log_f_y - state.log_target)
        if batchable:
            log_f_y = self.target.log_target_many(ys)
            grads = self.target.grad_log_target_many(ys)
            means_y = ys + 0.5 * self.h * (grads @ self._g.T)
            log_q_xy = -0.5 * (
                self.dim * _LOG_2PI
                + state.proposal.log_det
                + np.einsum("ij,ij->i", eps, eps)
            )
            r = (state.x - means_y).T
            zs = solve_triangular(state.proposal.chol, r, lower=True, check_finite=False)
            log_q_yx = -0.5 * (
                self.dim * _LOG_2PI
                + state.proposal.log_det
                + np.einsum("ij,ij->j", zs, zs)
            )
            delta = log_f_y + log_q_yx - state.log_target - log_q_xy
            return ys, np.minimum(0.0, delta)
        log_alpha = np.empty(n)
        for i in range(n):
            log_alpha[i] = self.log_accept(state.x, ys[i])
        return ys, log_alpha


def run_chain(
    config: SamplerConfig,
    target: Target,
    n: int,
    rng: np.random.Generator | None = None,
    preconditioner: SpdMatrix | None = None,
    progress_every: int | None = None,
    progress_stream: IO[str] | None = None,
) -> ChainTrace:
    """Run a chain of `n` states (the initial state plus n-1 transitions).

    A step failure raises :class:`SamplerError` carrying the completed prefix
    of the trace. Progress lines (iteration count and running acceptance
    rate) go to `progress_stream` every `progress_every` steps when asked.
    """
    if n < 1:
        raise ValueError("need at least one state")
    kernel = Kernel(target, config, preconditioner=preconditioner)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = kernel.state_at(config.initial_state)
    states = np.empty((n, target.dim))
    states[0] = state.x
    accepted = np.empty(n - 1, dtype=bool) if config.adjusted else None
    stream = progress_stream if progress_stream is not None else sys.stderr
    n_accepted = 0
    start = time.perf_counter()
    for i in range(1, n):
        try:
            state, flag = kernel.step(state, rng)
        except Exception as exc:
            partial = ChainTrace(
                states=states[:i].copy(),
                accepted=None if accepted is None else accepted[: i - 1].copy(),
                wall_time=time.perf_counter() - start,
                step_size=config.step_size,
                algorithm=config.algorithm,
            )
            raise SamplerError(str(exc), iteration=i, partial=partial) from exc
        states[i] = state.x
        if accepted is not None:
            accepted[i - 1] = flag
            n_accepted += flag
        if progress_every and i % progress_every == 0:
            rate = n_accepted / i if accepted is not None else float("nan")
            print(f"iteration={i} acceptance={rate:.4f}", file=stream, flush=True)
    wall = time.perf_counter() - start
    return ChainTrace(
        states=states,
        accepted=accepted,
        wall_time=wall,
        step_size=config.step_size,
        algorithm=config.algorithm,
    )


def tune_step_size(
    config: SamplerConfig,
    target: Target,
    band: tuple[float, float] = (0.60, 0.70),
    pilot_iterations: int = 2000,
    max_trials: int = 40,
    preconditioner: SpdMatrix | None = None,
) -> float:
    """Find a step size whose pilot acceptance rate lands inside `band`.

    Acceptance is monotone decreasing in h in the regimes of interest, so the
    search brackets the band geometrically (factor 8 expansions) and then
    bisects in log h. Each trial runs a fresh pilot chain from the config's
    initial state with a seed derived from (config.seed, trial index), so the
    whole search is deterministic. Raises :class:`TuningError` with the
    (h, rate) history if `max_trials` pilots are not enough.
    """
    if config.algorithm not in ADJUSTED_ALGORITHMS:
        raise ValueError("step-size tuning needs an accept-reject kernel")
    lo, hi = band
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError("band must satisfy 0 <= lo < hi <= 1")
    h = config.step_size
    h_low = None  # rate above the band: h can grow
    h_high = None  # rate below the band: h must shrink
    history: list[tuple[float, float]] = []
    for trial in range(max_trials):
        trial_config = replace(config, step_size=h, seed=config.seed)
        rng = np.random.default_rng([config.seed, 0x7E57, trial])
        trace = run_chain(
            trial_config, target, pilot_iterations, rng=rng, preconditioner=preconditioner
        )
        rate = trace.acceptance_rate
        history.append((h, rate))
        if lo < rate < hi:
            return h
        if rate >= hi:
            h_low = h
        else:
            h_high = h
        if h_high is None:
            h = h_low * 8.0
        elif h_low is None:
            h = h_high / 8.0
        else:
            h = math.sqrt(h_low * h_high)
    raise TuningError(
        f"no step size found in {max_trials} pilots for band {band}", history
    )
