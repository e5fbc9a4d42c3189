"""Spatial GLMM posteriors for the latent field: binomial-logit and Poisson-log.

The sampling target is the conditional density of the random effects x given
data z,

    log f(x) = loglik(z | x) - (x - mu)' Sigma^{-1} (x - mu) / 2 + const,

with a Gaussian process prior evaluated at the observation sites. Both
families have diagonal third-derivative tensors, which is what makes the
closed-form curvature corrections (`gamma_from_geometry`,
`omega_from_geometry`) exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import expit

from .covariance import SpdMatrix

__all__ = [
    "GLMM_FAMILIES",
    "GlmmSpec",
    "LocalGeometry",
    "gamma_from_geometry",
    "omega_from_geometry",
    "simulate_data",
]

GLMM_FAMILIES = ("binomial_logit", "poisson_log")

#: Largest latent value accepted when simulating Poisson counts; above this
#: exp(x) is within two decades of double overflow and the draw is refused.
POISSON_SIM_MAX_LOG_RATE = 700.0


@dataclass(frozen=True)
class LocalGeometry:
    """Target geometry at one point: value, gradient, curvature, third diagonal."""

    value: float
    gradient: np.ndarray
    neg_hessian: np.ndarray
    third_diag: np.ndarray


@dataclass(frozen=True)
class GlmmSpec:
    """A GLMM conditional target for the latent field at the sites.

    Parameters
    ----------
    family : str
        ``binomial_logit`` or ``poisson_log``.
    z : ndarray of int, shape (m,)
        Observed counts; ``0 <= z <= trials`` for binomial, ``z >= 0`` for
        Poisson.
    prior_mean : ndarray, shape (m,)
        Prior mean of the field at the sites (regression surface).
    prior_cov : SpdMatrix
        Prior covariance of the field at the sites.
    trials : ndarray of int, shape (m,), optional
        Binomial sample sizes, required iff family is binomial.
    """

    family: str
    z: np.ndarray
    prior_mean: np.ndarray
    prior_cov: SpdMatrix
    trials: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in GLMM_FAMILIES:
            raise ValueError(f"unknown GLMM family {self.family!r}")
        m = self.prior_cov.dim
        z = np.asarray(self.z)
        if z.shape != (m,):
            raise ValueError(f"z has shape {z.shape}, expected ({m},)")
        if not np.issubdtype(z.dtype, np.integer):
            zi = np.asarray(z, dtype=np.int64)
            if np.any(zi != z):
                raise ValueError("z must be integer counts")
            z = zi
        prior_mean = np.asarray(self.prior_mean, dtype=float)
        if prior_mean.shape != (m,):
            raise ValueError(f"prior_mean has shape {prior_mean.shape}, expected ({m},)")
        if self.family == "binomial_logit":
            if self.trials is None:
                raise ValueError("binomial family requires trials")
            trials = np.asarray(self.trials)
            if trials.shape != (m,):
                raise ValueError("trials must match z in shape")
            trials = np.asarray(trials, dtype=np.int64)
            if np.any(trials < 1):
                raise ValueError("trials must be >= 1")
            if np.any(z < 0) or np.any(z > trials):
                raise ValueError("binomial counts must satisfy 0 <= z <= trials")
            object.__setattr__(self, "trials", _readonly(trials))
        else:
            if self.trials is not None:
                raise ValueError("poisson family takes no trials")
            if np.any(z < 0):
                raise ValueError("poisson counts must be nonnegative")
        object.__setattr__(self, "z", _readonly(np.asarray(z, dtype=np.int64)))
        object.__setattr__(self, "prior_mean", _readonly(prior_mean))
        # One dense solve up front; every curvature evaluation reuses it.
        prec = self.prior_cov.inverse()
        prec = 0.5 * (prec + prec.T)
        object.__setattr__(self, "_precision", _readonly(prec))

    @property
    def dim(self) -> int:
        return self.prior_cov.dim

    @property
    def prior_precision(self) -> np.ndarray:
        return self._precision

    # -- log density and derivatives -------------------------------------

    def log_target(self, x: np.ndarray) -> float:
        """Unnormalized log posterior density of the latent field.

        Additive constants (binomial coefficients, z!, the Gaussian
        normalizer) are dropped throughout; only differences matter to the
        samplers. For the Poisson family the value underflows to -inf once
        some exp(x_i) overflows, which a Metropolis step treats as an
        always-rejected region.
        """
        x = self._check_point(x)
        r = x - self.prior_mean
        quad = 0.5 * float(r @ (self._precision @ r))
        if self.family == "binomial_logit":
            loglik = float(self.z @ x - self.trials @ np.logaddexp(0.0, x))
        else:
            with np.errstate(over="ignore"):
                loglik = float(self.z @ x - np.exp(x).sum())
        return loglik - quad

    def grad_log_target(self, x: np.ndarray) -> np.ndarray:
        x = self._check_point(x)
        return self._data_score(x) - self._precision @ (x - self.prior_mean)

    def neg_hessian(self, x: np.ndarray) -> np.ndarray:
        """Negative Hessian of log f, i.e. the observed information at x.

        Canonical links make this coincide with the conditional expected
        information: prior precision plus a positive diagonal data term, so
        it is positive definite for every x.
        """
        x = self._check_point(x)
        out = self._precision.copy()
        idx = np.arange(self.dim)
        out[idx, idx] += self._data_weight(x)
        return out

    def third_diag(self, x: np.ndarray) -> np.ndarray:
        """Diagonal of the third-derivative tensor of log f.

        All mixed third partials vanish for both families (the likelihood is
        a sum of one-coordinate terms and the prior is quadratic), so the
        diagonal is the whole tensor.
        """
        x = self._check_point(x)
        if self.family == "binomial_logit":
            s = expit(x)
            sm = expit(-x)
            return -self.trials * s * sm * (sm - s)
        with np.errstate(over="ignore"):
            return -np.exp(x)

    def local_geometry(self, x: np.ndarray) -> LocalGeometry:
        return LocalGeometry(
            value=self.log_target(x),
            gradient=self.grad_log_target(x),
            neg_hessian=self.neg_hessian(x),
            third_diag=self.third_diag(x),
        )

    def gamma_vector(self, x: np.ndarray) -> np.ndarray:
        """Divergence-of-inverse-information drift correction at x."""
        info = self.neg_hessian(x)
        chol = np.linalg.cholesky(info)
        info_inv = cho_solve((chol, True), np.eye(self.dim), check_finite=False)
        return gamma_from_geometry(info_inv, self.third_diag(x))

    def omega_vector(self, x: np.ndarray) -> np.ndarray:
        """Gamma plus the log-determinant gradient half-term."""
        info = self.neg_hessian(x)
        chol = np.linalg.cholesky(info)
        info_inv = cho_solve((chol, True), np.eye(self.dim), check_finite=False)
        return omega_from_geometry(info_inv, self.third_diag(x))

    # -- batch variants (used by the Monte Carlo drift estimator) --------

    def log_target_many(self, xs: np.ndarray) -> np.ndarray:
        """log_target evaluated on each row of an (n, m) array."""
        xs = np.asarray(xs, dtype=float)
        r = xs - self.prior_mean
        quad = 0.5 * np.einsum("ij,ij->i", r, r @ self._precision)
        if self.family == "binomial_logit":
            loglik = xs @ self.z - np.logaddexp(0.0, xs) @ self.trials
        else:
            with np.errstate(over="ignore"):
                loglik = xs @ self.z - np.exp(xs).sum(axis=1)
        return loglik - quad

    def grad_log_target_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if self.family == "binomial_logit":
            score = self.z - self.trials * expit(xs)
        else:
            with np.errstate(over="ignore"):
                score = self.z - np.exp(xs)
        return score - (xs - self.prior_mean) @ self._precision

    # -- mode ------------------------------------------------------------

    def find_mode(self, grad_rtol: float = 1e-8, max_iter: int = 100) -> np.ndarray:
        """Posterior mode by damped Newton from the prior mean.

        The target is strictly log-concave (positive definite negative
        Hessian everywhere), so Newton with Armijo backtracking is reliable;
        convergence is declared when ||grad|| <= grad_rtol * max(1, ||z||).
        """
        tol = grad_rtol * max(1.0, float(np.linalg.norm(self.z)))
        x = self.prior_mean.copy()
        value = self.log_target(x)
        for _ in range(max_iter):
            grad = self.grad_log_target(x)
            if np.linalg.norm(grad) <= tol:
                return x
            chol = np.linalg.cholesky(self.neg_hessian(x))
            step = cho_solve((chol, True), grad, check_finite=False)
            slope = float(grad @ step)
            t = 1.0
            while t > 1e-12:
                trial = x + t * step
                trial_value = self.log_target(trial)
                if trial_value >= value + 1e-4 * t * slope:
                    break
                t *= 0.5
            else:
                raise RuntimeError("mode search: line search failed to make progress")
            x, value = trial, trial_value
        raise RuntimeError(f"mode search did not converge in {max_iter} iterations")

    # -- internals --------------------------------------------------------

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.dim},)")
        if not np.isfinite(x).all():
            raise ValueError("state has non-finite components")
        return x

    def _data_score(self, x: np.ndarray) -> np.ndarray:
        if self.family == "binomial_logit":
            return self.z - self.trials * expit(x)
        with np.errstate(over="ignore"):
            return self.z - np.exp(x)

    def _data_weight(self, x: np.ndarray) -> np.ndarray:
        if self.family == "binomial_logit":
            return self.trials * expit(x) * expit(-x)
        with np.errstate(over="ignore"):
            return np.exp(x)


def gamma_from_geometry(info_inv: np.ndarray, third_diag: np.ndarray) -> np.ndarray:
    """Drift correction sum_j d/dx_j [I(x)^{-1}]_{ij} for diagonal third tensors.

    With only [I]_{jj} depending on x_j, differentiating the inverse gives

        Gamma_i = - sum_j [I^{-1}]_{ij} (d[I]_{jj}/dx_j) [I^{-1}]_{jj},

    and d[I]_{jj}/dx_j is minus the third-derivative diagonal.
    """
    d_info = -np.asarray(third_diag, dtype=float)
    return -info_inv @ (d_info * np.diag(info_inv))


def omega_from_geometry(info_inv: np.ndarray, third_diag: np.ndarray) -> np.ndarray:
    """Manifold drift: gamma plus half of I^{-1} grad log|I(x)|.

    Under the same diagonal-dependence structure, d log|I|/dx_j equals
    [I^{-1}]_{jj} d[I]_{jj}/dx_j by Jacobi's formula.
    """
    d_info = -np.asarray(third_diag, dtype=float)
    grad_log_det = np.diag(info_inv) * d_info
    return gamma_from_geometry(info_inv, third_diag) + 0.5 * (info_inv @ grad_log_det)


def simulate_data(
    family: str,
    x_true: np.ndarray,
    rng: np.random.Generator,
    trials: np.ndarray | None = None,
) -> np.ndarray:
    """Draw counts z given the latent field under the named family."""
    x_true = np.asarray(x_true, dtype=float)
    if family == "binomial_logit":
        if trials is None:
            raise ValueError("binomial family requires trials")
        return rng.binomial(np.asarray(trials, dtype=np.int64), expit(x_true))
    if family == "poisson_log":
        if np.any(x_true > POISSON_SIM_MAX_LOG_RATE):
            raise ValueError(
                f"latent value above {POISSON_SIM_MAX_LOG_RATE}: Poisson rate would overflow"
            )
        return rng.poisson(np.exp(x_true))
    raise ValueError(f"unknown GLMM family {family!r}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a
