"""Spatial covariance models and Gaussian random field simulation.

Everything downstream (the GLMM prior, the preconditioners, the step-size
bounds) is built on a dense site-by-site covariance matrix, so this module
owns the stationary correlation families, the jittered Cholesky policy, and
field draws.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import pdist, squareform
from scipy.special import gamma as gamma_fn
from scipy.special import kv

__all__ = [
    "CORRELATION_FAMILIES",
    "CovarianceModel",
    "FactorizationError",
    "SiteSet",
    "SpdMatrix",
    "build_covariance",
    "correlation",
    "sample_field",
]

CORRELATION_FAMILIES = ("exponential", "matern", "spherical")

#: Relative jitter ladder for near-singular covariance matrices: each level
#: is multiplied by the sill before being added to the diagonal.
JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class FactorizationError(RuntimeError):
    """Cholesky failed even at the largest permitted diagonal jitter."""


@dataclass(frozen=True)
class SiteSet:
    """Observation sites in the unit square.

    Parameters
    ----------
    coords : ndarray, shape (n, 2)
        Site coordinates. Must lie in [0, 1]^2 and be pairwise distinct;
        duplicated sites make every correlation matrix exactly singular.
    """

    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float, copy=True)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"expected (n, 2) coordinates, got shape {coords.shape}")
        if coords.shape[0] < 1:
            raise ValueError("need at least one site")
        if not np.isfinite(coords).all():
            raise ValueError("site coordinates must be finite")
        if coords.min() < 0.0 or coords.max() > 1.0:
            raise ValueError("site coordinates must lie in the unit square")
        if coords.shape[0] > 1 and pdist(coords).min() == 0.0:
            raise ValueError("sites must be pairwise distinct")
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return self.coords.shape[0]

    def distances(self) -> np.ndarray:
        """Condensed (upper-triangle) Euclidean distance vector."""
        return pdist(self.coords)


@dataclass(frozen=True)
class CovarianceModel:
    """Stationary isotropic covariance: ``sill * correlation(distance)``.

    Parameters
    ----------
    family : str
        One of ``exponential``, ``matern``, ``spherical``.
    sill : float
        Marginal variance, > 0.
    range : float
        Correlation range parameter, > 0.
    smoothness : float
        Matern smoothness, > 0; ignored by the other families.
    """

    family: str = "exponential"
    sill: float = 1.0
    range: float = 0.5
    smoothness: float = 1.5

    def __post_init__(self):
        if self.family not in CORRELATION_FAMILIES:
            raise ValueError(f"unknown correlation family {self.family!r}")
        if not (self.sill > 0.0 and np.isfinite(self.sill)):
            raise ValueError("sill must be positive and finite")
        if not (self.range > 0.0 and np.isfinite(self.range)):
            raise ValueError("range must be positive and finite")
        if not (self.smoothness > 0.0 and np.isfinite(self.smoothness)):
            raise ValueError("smoothness must be positive and finite")


def correlation(model: CovarianceModel, d: np.ndarray) -> np.ndarray:
    """Evaluate the correlation function of `model` at distances `d`.

    The Matern family uses the geostatistical convention

        rho(d) = (t^nu / (2^(nu-1) Gamma(nu))) K_nu(t),   t = d / range,

    which reduces to ``exp(-t)`` at nu = 1/2 and to the closed forms
    ``(1 + t) exp(-t)`` and ``(1 + t + t^2/3) exp(-t)`` at nu = 3/2 and
    nu = 5/2. Those three cases are special-cased so the default smoothness
    never touches the Bessel routine.
    """
    d = np.asarray(d, dtype=float)
    if d.size and d.min() < 0.0:
        raise ValueError("distances must be nonnegative")
    t = d / model.range
    if model.family == "exponential":
        return np.exp(-t)
    if model.family == "spherical":
        inside = 1.0 - 1.5 * t + 0.5 * t**3
        return np.where(t < 1.0, inside, 0.0)
    nu = model.smoothness
    if nu == 0.5:
        return np.exp(-t)
    if nu == 1.5:
        return (1.0 + t) * np.exp(-t)
    if nu == 2.5:
        return (1.0 + t + t**2 / 3.0) * np.exp(-t)
    out = np.empty_like(t)
    zero = t == 0.0
    tz = t[~zero]
    out[~zero] = tz**nu * kv(nu, tz) / (2.0 ** (nu - 1.0) * gamma_fn(nu))
    out[zero] = 1.0
    return out


@dataclass(frozen=True)
class SpdMatrix:
    """A symmetric positive definite matrix with its lower Cholesky factor.

    Construct through :meth:`from_matrix` (validates symmetry and factors)
    rather than directly, unless both pieces are already known to be
    consistent.
    """

    matrix: np.ndarray
    chol: np.ndarray

    SYMMETRY_RTOL = 1e-12

    @classmethod
    def from_matrix(cls, a: np.ndarray) -> "SpdMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        scale = max(1.0, np.abs(a).max())
        if np.abs(a - a.T).max() > cls.SYMMETRY_RTOL * scale:
            raise ValueError("matrix is not symmetric")
        sym = 0.5 * (a + a.T)
        chol = np.linalg.cholesky(sym)  # raises LinAlgError if not PD
        return cls(_frozen(sym), _frozen(chol))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``A x = b`` through the cached factor."""
        y = solve_triangular(self.chol, b, lower=True, check_finite=False)
        return solve_triangular(self.chol, y, lower=True, trans="T", check_finite=False)

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.dim))

    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    @classmethod
    def identity(cls, dim: int) -> "SpdMatrix":
        eye = np.eye(dim)
        return cls(_frozen(eye), _frozen(eye.copy()))

    @classmethod
    def from_diagonal(cls, diag: np.ndarray) -> "SpdMatrix":
        diag = np.asarray(diag, dtype=float)
        if np.any(diag <= 0.0):
            raise ValueError("diagonal entries must be positive")
        return cls(_frozen(np.diag(diag)), _frozen(np.diag(np.sqrt(diag))))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def build_covariance(sites: SiteSet, model: CovarianceModel) -> SpdMatrix:
    """Dense covariance matrix over `sites` under `model`.

    Off-diagonal entries are evaluated once per pair and mirrored, so the
    result is exactly symmetric with ``sill`` on the diagonal. If the plain
    Cholesky fails, an escalating diagonal jitter (1e-10 to 1e-6 times the
    sill, one decade at a time) is applied before giving up.
    """
    n = len(sites)
    cov = np.full((n, n), model.sill)
    if n > 1:
        off = model.sill * correlation(model, sites.distances())
        cov[np.triu_indices(n, k=1)] = off
        cov = np.triu(cov) + np.triu(cov, k=1).T
    jitters = (0.0,) + tuple(j * model.sill for j in JITTER_LADDER)
    for jitter in jitters:
        try:
            out = SpdMatrix.from_matrix(cov + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        if jitter > 0.0:
            warnings.warn(
                f"covariance factorization needed diagonal jitter {jitter:.1e}",
                stacklevel=2,
            )
        return out
    raise FactorizationError(
        f"covariance matrix not factorizable at jitter {jitters[-1]:.1e}"
    )


def sample_field(mean: np.ndarray, cov: SpdMatrix, rng: np.random.Generator) -> np.ndarray:
    """One draw of a Gaussian field: ``mean + L eps`` with ``L`` the factor."""
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (cov.dim,):
        raise ValueError(f"mean has shape {mean.shape}, expected ({cov.dim},)")
    return mean + cov.chol @ rng.standard_normal(cov.dim)
