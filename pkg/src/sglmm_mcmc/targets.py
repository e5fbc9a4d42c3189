"""Target interface the samplers run against, plus a Gaussian reference target.

A target is anything with a log density and gradient; position-dependent
kernels additionally need the negative Hessian and the third-derivative
diagonal, and preconditioner resolution may need `find_mode` or `prior_cov`.
`GlmmSpec` satisfies the full interface; `GaussianTarget` does too and is the
workhorse for exactness checks (its curvature is constant and its third
derivatives vanish).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .covariance import SpdMatrix

__all__ = ["FlatTarget", "GaussianTarget", "Target"]


@runtime_checkable
class Target(Protocol):
    @property
    def dim(self) -> int: ...

    def log_target(self, x: np.ndarray) -> float: ...

    def grad_log_target(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class GaussianTarget:
    """Multivariate normal log density (constants dropped)."""

    mean: np.ndarray
    cov: SpdMatrix

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.shape != (self.cov.dim,):
            raise ValueError("mean and covariance dimensions disagree")
        object.__setattr__(self, "mean", mean)
        prec = self.cov.inverse()
        object.__setattr__(self, "_precision", 0.5 * (prec + prec.T))

    @property
    def dim(self) -> int:
        return self.cov.dim

    @property
    def prior_cov(self) -> SpdMatrix:
        # Lets the fixed preconditioners treat the covariance as the "prior".
        return self.cov

    def log_target(self, x: np.ndarray) -> float:
        r = np.asarray(x, dtype=float) - self.mean
        return -0.5 * float(r @ (self._precision @ r))

    def grad_log_target(self, x: np.ndarray) -> np.ndarray:
        r = np.asarray(x, dtype=float) - self.mean
        return -(self._precision @ r)

    def neg_hessian(self, x: np.ndarray) -> np.ndarray:
        return self._precision.copy()

    def third_diag(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.dim)

    def find_mode(self) -> np.ndarray:
        return self.mean.copy()

    def log_target_many(self, xs: np.ndarray) -> np.ndarray:
        r = np.asarray(xs, dtype=float) - self.mean
        return -0.5 * np.einsum("ij,ij->i", r, r @ self._precision)

    def grad_log_target_many(self, xs: np.ndarray) -> np.ndarray:
        r = np.asarray(xs, dtype=float) - self.mean
        return -(r @ self._precision)


@dataclass(frozen=True)
class FlatTarget:
    """Improper flat density: zero log density and gradient everywhere.

    Turns any Langevin proposal into a pure Gaussian random walk; only useful
    for exercising sampler mechanics.
    """

    dimension: int

    @property
    def dim(self) -> int:
        return self.dimension

    def log_target(self, x: np.ndarray) -> float:
        return 0.0

    def grad_log_target(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.dim)

    def log_target_many(self, xs: np.ndarray) -> np.ndarray:
        return np.zeros(np.asarray(xs).shape[0])

    def grad_log_target_many(self, xs: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(xs, dtype=float))
