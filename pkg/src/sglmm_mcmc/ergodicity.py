"""Numerical checks for geometric ergodicity of the Gaussian-proposal kernels.

Nothing here is a proof. The module evaluates the quantities that the drift
and minorization arguments for these kernels turn on: explicit step-size
bounds for the fixed-preconditioner and position-dependent chains, the radial
constant C2(s) controlling the exponential-drift comparison, a spectral
contraction check for the unadjusted chain, Monte Carlo estimates of the
one-step drift ratio P V / V, and ray probes for the asymptotic conditions
(including the mean-growth condition whose failure rules geometric
ergodicity out).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .covariance import SpdMatrix

__all__ = [
    "DriftSpec",
    "ErgodicityReport",
    "a4_ray_probe",
    "a4_threshold",
    "a5_ray_probe",
    "a5_threshold",
    "c2",
    "drift_ratio",
    "log_c2",
    "mmala_h_bound",
    "non_ge_drift_check",
    "pcmala_h_bound",
    "pcula_spectral_check",
]

VERDICTS = ("satisfied", "violated", "inconclusive")

#: Relative drift in a ray-probe sequence below which the sequence is
#: treated as stabilized at its last value.
PROBE_STABLE_RTOL = 0.01


@dataclass(frozen=True)
class ErgodicityReport:
    """Outcome of one check: the condition name, the threshold it is tested
    against, the measured value, and a verdict in {satisfied, violated,
    inconclusive}. ``details`` carries per-ray or per-radius traces."""

    condition: str
    threshold: float
    measured: float
    verdict: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "threshold": self.threshold,
            "measured": self.measured,
            "verdict": self.verdict,
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# -- step-size bounds -------------------------------------------------------


def _eig_range(a: np.ndarray | SpdMatrix) -> tuple[float, float]:
    m = a.matrix if isinstance(a, SpdMatrix) else np.asarray(a, dtype=float)
    vals = np.linalg.eigvalsh(m)
    if vals[0] <= 0.0:
        raise ValueError("matrix is not positive definite")
    return float(vals[0]), float(vals[-1])


def pcmala_h_bound(sigma: np.ndarray | SpdMatrix, g: np.ndarray | SpdMatrix) -> float:
    """Geometric-ergodicity step-size bound for the fixed-G Langevin chain
    on a Gaussian-tailed target with covariance `sigma`:

        h < 4 psi_min^2 zeta_min / (psi_max^3 zeta_max^2),

    where psi are the eigenvalues of sigma^{-1} and zeta those of G. For
    sigma = G = I this is exactly 4.
    """
    s_min, s_max = _eig_range(sigma)
    psi_min, psi_max = 1.0 / s_max, 1.0 / s_min
    zeta_min, zeta_max = _eig_range(g)
    return 4.0 * psi_min**2 * zeta_min / (psi_max**3 * zeta_max**2)


def mmala_h_bound(sigma: np.ndarray | SpdMatrix, trials: np.ndarray) -> float:
    """Step-size bound for the position-dependent chains on the binomial
    target, where the state-dependent G(x) is sandwiched between

        G1 = (diag(trials)/4 + sigma^{-1})^{-1}   and   G2 = sigma:

        h < 4 psi_min^3 zeta1_min^2 / (psi_max^4 zeta2_max^3).
    """
    sigma_m = sigma.matrix if isinstance(sigma, SpdMatrix) else np.asarray(sigma, float)
    trials = np.asarray(trials, dtype=float)
    if trials.shape != (sigma_m.shape[0],):
        raise ValueError("trials length must match sigma dimension")
    if np.any(trials < 1):
        raise ValueError("trials must be >= 1")
    s_min, s_max = _eig_range(sigma_m)
    psi_min, psi_max = 1.0 / s_max, 1.0 / s_min
    if isinstance(sigma, SpdMatrix):
        precision = sigma.inverse()
    else:
        precision = np.linalg.inv(sigma_m)
    info_upper = 0.25 * np.diag(trials) + 0.5 * (precision + precision.T)
    # Smallest eigenvalue of G1 is one over the largest of its inverse.
    _, m_max = _eig_range(info_upper)
    zeta1_min = 1.0 / m_max
    zeta2_max = s_max
    return 4.0 * psi_min**3 * zeta1_min**2 / (psi_max**4 * zeta2_max**3)


def pcula_spectral_check(
    h: float, g: np.ndarray | SpdMatrix, sigma: np.ndarray | SpdMatrix
) -> ErgodicityReport:
    """Contraction check for the unadjusted fixed-G chain on a Gaussian core.

    Forms A = I - (h/2) G sigma^{-1} and measures the largest eigenvalue of
    A'A (the squared top singular value); the chain's linear part contracts
    iff that value is below 1. For commuting G sigma^{-1} with eigenvalues
    rho this reduces to rho in (0, 4/h).
    """
    if not (h > 0.0 and np.isfinite(h)):
        raise ValueError("h must be positive and finite")
    g_m = g.matrix if isinstance(g, SpdMatrix) else np.asarray(g, dtype=float)
    if isinstance(sigma, SpdMatrix):
        precision = sigma.inverse()
    else:
        precision = np.linalg.inv(np.asarray(sigma, dtype=float))
    a = np.eye(g_m.shape[0]) - 0.5 * h * (g_m @ precision)
    lam = float(np.linalg.eigvalsh(a.T @ a)[-1])
    return ErgodicityReport(
        condition="pcula_spectral_contraction",
        threshold=1.0,
        measured=lam,
        verdict="satisfied" if lam < 1.0 else "violated",
    )


# -- the radial constant C2(s) ----------------------------------------------


def log_c2(
    s: float,
    h: float,
    d: int,
    log_det_g1: float = 0.0,
    log_det_g2: float = 0.0,
    rel_tol: float = 1e-12,
) -> float:
    """log of the radial comparison constant

        C2(s) = h^{-d/2} (pi/2)^{(d-2)/2} (|G2|/|G1|)^{1/2} exp(h s^2 / 2)
                * Integral_0^inf exp(-(r - h s)^2 / (2h)) r^{d-1} dr,

    computed entirely in log space. The integrand is a shifted Gaussian times
    a power of r whose mode sits at (hs + sqrt(h^2 s^2 + 4(d-1)h))/2; the
    quadrature covers twenty Gaussian standard deviations past that point
    and refines a composite Simpson rule (log-sum-exp accumulation) until
    two consecutive refinements agree to `rel_tol` in the log.

    In one dimension with equal determinants this reduces to the closed form
    2 exp(h s^2 / 2) Phi(s sqrt(h)), which tends to 1 as s -> 0.
    """
    if not (h > 0.0 and np.isfinite(h)):
        raise ValueError("h must be positive and finite")
    if s < 0.0 or not np.isfinite(s):
        raise ValueError("s must be nonnegative and finite")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    hs = h * s
    mode = 0.5 * (hs + math.sqrt(hs * hs + 4.0 * (d - 1) * h))
    upper = max(hs, mode) + 20.0 * math.sqrt(h)

    def log_integrand(r: np.ndarray) -> np.ndarray:
        out = -0.5 * (r - hs) ** 2 / h
        if d > 1:
            with np.errstate(divide="ignore"):
                out = out + (d - 1) * np.log(r)
        return out

    log_integral = None
    n = 64
    while n <= 2**21:
        r = np.linspace(0.0, upper, n + 1)
        log_w = np.full(n + 1, math.log(2.0))
        log_w[1::2] = math.log(4.0)
        log_w[0] = log_w[-1] = 0.0
        step = upper / n
        candidate = logsumexp(log_integrand(r) + log_w) + math.log(step / 3.0)
        if log_integral is not None and abs(candidate - log_integral) < rel_tol:
            log_integral = candidate
            break
        log_integral = candidate
        n *= 2
    else:
        raise RuntimeError("C2 quadrature did not converge")
    return (
        -0.5 * d * math.log(h)
        + 0.5 * (d - 2) * math.log(math.pi / 2.0)
        + 0.5 * (log_det_g2 - log_det_g1)
        + 0.5 * h * s * s
        + log_integral
    )


def c2(
    s: float,
    h: float,
    d: int,
    log_det_g1: float = 0.0,
    log_det_g2: float = 0.0,
) -> float:
    """C2(s) itself; may overflow to inf in high dimension (use log_c2 then)."""
    value = log_c2(s, h, d, log_det_g1, log_det_g2)
    with np.errstate(over="ignore"):
        return float(np.exp(value))


# -- asymptotic thresholds and ray probes ------------------------------------


def a4_threshold(s: float, c1: float, c2_value: float) -> float:
    """Margin the drift condition needs from the proposal-mean contraction:

        liminf ||G2^{-1/2} x|| - ||G2^{-1/2} c(x)|| > [log C2(s) - log(1 - C1)] / s.
    """
    if not (s > 0.0):
        raise ValueError("s must be positive")
    if not (0.0 <= c1 < 1.0):
        raise ValueError("C1 must lie in [0, 1)")
    if not (c2_value > 0.0):
        raise ValueError("C2 must be positive")
    return (math.log(c2_value) - math.log1p(-c1)) / s


def a5_threshold(c1: float, log_det_g1: float, log_det_g2: float) -> float:
    """Upper limit for limsup ||c(x)||^2 / ||x||^2 in the polynomial-drift
    condition: (1 - C1) (|G1| / |G2|)^{1/2}."""
    if not (0.0 <= c1 < 1.0):
        raise ValueError("C1 must lie in [0, 1)")
    return (1.0 - c1) * math.exp(0.5 * (log_det_g1 - log_det_g2))


def _ray_series(
    fn: Callable[[np.ndarray], float],
    rays: Sequence[np.ndarray],
    radii: Sequence[float],
) -> np.ndarray:
    rays = [np.asarray(v, dtype=float) for v in rays]
    rays = [v / np.linalg.norm(v) for v in rays]
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(np.diff(radii) <= 0.0):
        raise ValueError("need at least two strictly increasing radii")
    return np.array([[fn(r * v) for r in radii] for v in rays])


def _stabilized(series: np.ndarray) -> bool:
    last, prev = series[-1], series[-2]
    return abs(last - prev) <= PROBE_STABLE_RTOL * max(1.0, abs(last))


def a4_ray_probe(
    mean_fn: Callable[[np.ndarray], np.ndarray],
    g2: SpdMatrix,
    s: float,
    c1: float,
    c2_value: float,
    rays: Sequence[np.ndarray],
    radii: Sequence[float] = (1e2, 1e3, 1e4),
) -> ErgodicityReport:
    """Probe the exponential-drift margin along rays.

    Evaluates ||G2^{-1/2} x|| - ||G2^{-1/2} c(x)|| at increasing radii; the
    worst ray at the largest radius is compared to :func:`a4_threshold`.
    A sequence still growing while already above the threshold counts as
    satisfied (the liminf can only be larger); anything unstabilized and not
    uniformly on one side is inconclusive. Advisory only.
    """

    def margin(x: np.ndarray) -> float:
        zx = solve_triangular(g2.chol, x, lower=True, check_finite=False)
        zc = solve_triangular(g2.chol, mean_fn(x), lower=True, check_finite=False)
        return float(np.linalg.norm(zx) - np.linalg.norm(zc))

    values = _ray_series(margin, rays, radii)
    threshold = a4_threshold(s, c1, c2_value)
    worst = values.min(axis=0)
    measured = float(worst[-1])
    if _stabilized(worst):
        verdict = "satisfied" if measured > threshold else "violated"
    elif np.all(worst > threshold) and worst[-1] > worst[-2]:
        verdict = "satisfied"
    elif np.all(worst <= threshold) and worst[-1] < worst[-2]:
        verdict = "violated"
    else:
        verdict = "inconclusive"
    return ErgodicityReport(
        condition="exponential_drift_margin",
        threshold=threshold,
        measured=measured,
        verdict=verdict,
        details={"radii": list(radii), "per_ray": values},
    )


def a5_ray_probe(
    mean_fn: Callable[[np.ndarray], np.ndarray],
    c1: float,
    log_det_g1: float,
    log_det_g2: float,
    rays: Sequence[np.ndarray],
    radii: Sequence[float] = (1e2, 1e3, 1e4),
) -> ErgodicityReport:
    """Probe limsup ||c(x)||^2 / ||x||^2 along rays against :func:`a5_threshold`."""

    def ratio(x: np.ndarray) -> float:
        return float(np.sum(mean_fn(x) ** 2) / np.sum(x**2))

    values = _ray_series(ratio, rays, radii)
    threshold = a5_threshold(c1, log_det_g1, log_det_g2)
    worst = values.max(axis=0)
    measured = float(worst[-1])
    if _stabilized(worst):
        verdict = "satisfied" if measured < threshold else "violated"
    elif np.all(worst < threshold) and worst[-1] < worst[-2]:
        verdict = "satisfied"
    elif np.all(worst >= threshold) and worst[-1] > worst[-2]:
        verdict = "violated"
    else:
        verdict = "inconclusive"
    return ErgodicityReport(
        condition="polynomial_drift_mean_ratio",
        threshold=threshold,
        measured=measured,
        verdict=verdict,
        details={"radii": list(radii), "per_ray": values},
    )


def non_ge_drift_check(
    target,
    h: float,
    g: np.ndarray | SpdMatrix | None = None,
    rays: Sequence[np.ndarray] | None = None,
    radii: Sequence[float] = (5.0, 10.0, 20.0),
    e_fn: Callable[[np.ndarray], np.ndarray] | None = None,
) -> ErgodicityReport:
    """Necessary-condition check: with proposal mean x + h e(x), a chain whose
    ||e(x)|| / ||x|| exceeds 2/h along some escape path cannot be
    geometrically ergodic.

    The default e(x) = (1/2) G grad log f(x) is the fixed-G Langevin drift
    (h-free); pass `e_fn` to probe another mean map. Verdict is ``violated``
    (not geometrically ergodic) when some ray's ratio exceeds 2/h at the
    largest radius and is still growing there; otherwise ``inconclusive``
    (the condition is one-directional).
    """
    if not (h > 0.0 and np.isfinite(h)):
        raise ValueError("h must be positive and finite")
    if e_fn is None:
        if g is None:
            g_m = None
        else:
            g_m = g.matrix if isinstance(g, SpdMatrix) else np.asarray(g, dtype=float)

        def e_fn(x: np.ndarray) -> np.ndarray:
            grad = target.grad_log_target(x)
            return 0.5 * grad if g_m is None else 0.5 * (g_m @ grad)

    if rays is None:
        ray = np.zeros(target.dim)
        ray[0] = 1.0
        rays = [ray]

    def ratio(x: np.ndarray) -> float:
        return float(np.linalg.norm(e_fn(x)) / np.linalg.norm(x))

    values = _ray_series(ratio, rays, radii)
    threshold = 2.0 / h
    exceeds = (values[:, -1] > threshold) & (values[:, -1] > values[:, -2])
    measured = float(values[:, -1].max())
    return ErgodicityReport(
        condition="mean_growth_rules_out_ge",
        threshold=threshold,
        measured=measured,
        verdict="violated" if bool(exceeds.any()) else "inconclusive",
        details={"radii": list(radii), "per_ray": values},
    )


# -- Monte Carlo drift ratio --------------------------------------------------


@dataclass(frozen=True)
class DriftSpec:
    """A drift function V >= 1 evaluated in log space.

    kinds: ``quadratic`` is V(x) = x'x + 1; ``exp_norm`` is exp(s ||x||);
    ``exp_scaled_norm`` is exp(s ||G2^{-1/2} x||) with `scale` = G2.
    """

    kind: str
    s: float | None = None
    scale: SpdMatrix | None = None

    def __post_init__(self):
        if self.kind not in ("quadratic", "exp_norm", "exp_scaled_norm"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.kind != "quadratic":
            if self.s is None or not (self.s > 0.0):
                raise ValueError("exponential drifts need s > 0")
        if self.kind == "exp_scaled_norm" and self.scale is None:
            raise ValueError("exp_scaled_norm needs a scale matrix")

    def log_value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return float(np.log1p(x @ x))
        if self.kind == "exp_norm":
            return self.s * float(np.linalg.norm(x))
        z = solve_triangular(self.scale.chol, x, lower=True, check_finite=False)
        return self.s * float(np.linalg.norm(z))

    def log_value_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if self.kind == "quadratic":
            return np.log1p(np.einsum("ij,ij->i", xs, xs))
        if self.kind == "exp_norm":
            return self.s * np.linalg.norm(xs, axis=1)
        zs = solve_triangular(self.scale.chol, xs.T, lower=True, check_finite=False)
        return self.s * np.linalg.norm(zs, axis=0)


def drift_ratio(
    kernel,
    drift: DriftSpec,
    x: np.ndarray,
    n_mc: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo estimate of P V(x) / V(x) for one Metropolis kernel:

        E[ alpha(x, Y) V(Y) / V(x) + (1 - alpha(x, Y)) ],  Y ~ q(x, .).

    Returns (estimate, standard error). All ratios are formed in log space;
    if V(Y)/V(x) still overflows, the x is too deep in the tail for this s
    and a RuntimeError says so. A kernel that can never accept gives exactly
    1 by construction.
    """
    if n_mc < 2:
        raise ValueError("need at least two Monte Carlo draws")
    x = np.asarray(x, dtype=float)
    ys, log_alpha = kernel.propose_batch(x, n_mc, rng)
    delta_log_v = drift.log_value_many(ys) - drift.log_value(x)
    alpha = np.exp(log_alpha)
    with np.errstate(over="ignore"):
        moved = np.exp(log_alpha + delta_log_v)
    if not np.isfinite(moved).all():
        raise RuntimeError(
            "V(Y)/V(x) overflowed; use a smaller s or a quadratic drift"
        )
    w = moved + (1.0 - alpha)
    estimate = float(np.mean(w))
    se = float(np.std(w, ddof=1) / math.sqrt(n_mc))
    return estimate, se
