"""Output analysis: autocorrelations, effective sample sizes, jump distance,
and the multivariate potential scale reduction factor.

Asymptotic variances come from non-overlapping batch means with batch size
floor(sqrt(n)); the multivariate version compares generalized variances
through log determinants, and the PSRF follows the usual max-eigenvalue
recipe over multiple chains. No burn-in is discarded here; callers slice
their traces first.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

__all__ = [
    "DiagnosticsReport",
    "MpsrfTrajectory",
    "acf",
    "batch_means_variance",
    "diagnostics_report",
    "ess",
    "mess",
    "mpsrf",
    "msjd",
]

#: Fewest iterations for a meaningful batch-means estimate.
MIN_BATCH_SAMPLES = 100


def _column(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a one-dimensional series")
    return x


def _matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("expected an (n, p) trace")
    return x


def acf(series: np.ndarray, max_lag: int = 50) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag.

    Uses the biased autocovariance (normalization by n at every lag) divided
    by the lag-0 value, which keeps the sequence positive semidefinite.
    """
    x = _column(series)
    n = x.size
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    if n <= max_lag:
        raise ValueError("series shorter than the requested lag window")
    x = x - x.mean()
    c0 = float(x @ x) / n
    if c0 == 0.0:
        raise ValueError("series has zero variance")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(x[:-k] @ x[k:]) / n / c0
    return out


def batch_means_variance(series: np.ndarray) -> tuple[float, int, int]:
    """Batch-means estimate of the asymptotic (CLT) variance of the mean.

    Splits the first a*b observations into a batches of size b =
    floor(sqrt(n)) and returns (b * var(batch means), a, b).
    """
    x = _column(series)
    n = x.size
    if n < MIN_BATCH_SAMPLES:
        raise ValueError(f"need at least {MIN_BATCH_SAMPLES} samples")
    b = int(math.isqrt(n))
    a = n // b
    means = x[: a * b].reshape(a, b).mean(axis=1)
    return float(b * means.var(ddof=1)), a, b


def ess(series: np.ndarray) -> float:
    """Effective sample size n * lambda^2 / sigma^2 of one coordinate, with
    lambda^2 the sample variance and sigma^2 the batch-means asymptotic
    variance, both over the first a*b observations."""
    x = _column(series)
    sigma2, a, b = batch_means_variance(x)
    used = x[: a * b]
    lam2 = float(used.var(ddof=1))
    if lam2 == 0.0:
        raise ValueError("series has zero variance")
    if sigma2 == 0.0:
        raise ValueError("batch means are constant; asymptotic variance is zero")
    return a * b * lam2 / sigma2


def mess(trace: np.ndarray) -> float:
    """Multivariate effective sample size n (|Lambda| / |Sigma|)^(1/p).

    Lambda is the sample covariance and Sigma the batch-means estimate of
    the asymptotic covariance; the ratio of generalized variances is formed
    through Cholesky log determinants. When p is too large for the batch
    count (p * floor(sqrt(n)) > n), the computation falls back to an evenly
    spaced coordinate subset and warns, since Sigma could not be positive
    definite at full dimension.
    """
    xs = _matrix(trace)
    n, p = xs.shape
    if n < MIN_BATCH_SAMPLES:
        raise ValueError(f"need at least {MIN_BATCH_SAMPLES} samples")
    b = int(math.isqrt(n))
    a = n // b
    p_max = a - 1
    if p > p_max:
        keep = np.unique(np.linspace(0, p - 1, p_max).astype(int))
        warnings.warn(
            f"trace has {p} coordinates but only {a} batches; "
            f"multivariate ESS computed on {keep.size} evenly spaced coordinates",
            stacklevel=2,
        )
        xs = xs[:, keep]
        p = keep.size
    used = xs[: a * b]
    lam = np.cov(used.T, ddof=1)
    batch_means = used.reshape(a, b, p).mean(axis=1)
    sigma = b * np.cov(batch_means.T, ddof=1)
    lam = np.atleast_2d(lam)
    sigma = np.atleast_2d(sigma)
    try:
        log_det_lam = 2.0 * np.sum(np.log(np.diag(np.linalg.cholesky(lam))))
        log_det_sigma = 2.0 * np.sum(np.log(np.diag(np.linalg.cholesky(sigma))))
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "covariance estimate is not positive definite; "
            "multivariate ESS is not available for this trace"
        ) from exc
    return float(a * b * np.exp((log_det_lam - log_det_sigma) / p))


def msjd(trace: np.ndarray) -> float:
    """Mean squared jump distance: average of ||X_{i+1} - X_i||^2."""
    xs = _matrix(trace)
    if xs.shape[0] < 2:
        raise ValueError("need at least two states")
    jumps = np.diff(xs, axis=0)
    return float(np.einsum("ij,ij->i", jumps, jumps).mean())


@dataclass(frozen=True)
class MpsrfTrajectory:
    """MPSRF evaluated on the first k iterations for each checkpoint k.

    Values are NaN at checkpoints where the pooled within-chain covariance
    was singular (flagged, not fabricated).
    """

    iterations: np.ndarray
    values: np.ndarray

    def final(self) -> float:
        return float(self.values[-1])

    def first_below(self, level: float) -> int | None:
        """Earliest checkpoint whose MPSRF is below `level`, or None."""
        ok = np.where(self.values < level)[0]
        return int(self.iterations[ok[0]]) if ok.size else None


def mpsrf(chains: list[np.ndarray], checkpoints: list[int] | None = None) -> MpsrfTrajectory:
    """Multivariate potential scale reduction factor over parallel chains.

    For M chains truncated at k iterations,

        R_p(k) = (k - 1)/k + (M + 1)/M * lambda_1,

    with lambda_1 the largest eigenvalue of W^{-1} B / k (W the pooled
    within-chain covariance, B/k the between-chain covariance of the chain
    means). Identical chains give exactly (k - 1)/k.
    """
    mats = [_matrix(c) for c in chains]
    if len(mats) < 2:
        raise ValueError("need at least two chains")
    n, p = mats[0].shape
    for c in mats[1:]:
        if c.shape != (n, p):
            raise ValueError("all chains must share the same shape")
    m = len(mats)
    if checkpoints is None:
        checkpoints = [n]
    checkpoints = sorted(int(k) for k in checkpoints)
    if checkpoints[0] < max(p + 1, 3):
        raise ValueError("checkpoints too early for a covariance estimate")
    if checkpoints[-1] > n:
        raise ValueError("checkpoint beyond the chain length")
    values = np.empty(len(checkpoints))
    for j, k in enumerate(checkpoints):
        heads = [c[:k] for c in mats]
        within = np.zeros((p, p))
        for c in heads:
            within += np.atleast_2d(np.cov(c.T, ddof=1))
        within /= m
        means = np.stack([c.mean(axis=0) for c in heads])
        between = np.atleast_2d(np.cov(means.T, ddof=1))
        try:
            lam = float(eigh(between, within, eigvals_only=True)[-1])
            values[j] = (k - 1) / k + (m + 1) / m * lam
        except (np.linalg.LinAlgError, ValueError):
            values[j] = np.nan
    return MpsrfTrajectory(iterations=np.asarray(checkpoints), values=values)


@dataclass
class DiagnosticsReport:
    """Per-chain summary: autocorrelations and ESS for monitored coordinates,
    multivariate ESS, mean squared jump distance, and time-normalized rates.

    ESS fields are None for unadjusted chains (their acceptance mechanism is
    absent and the batch-means CLT framing is not reported for them).
    """

    n: int
    dim: int
    monitored: list[int]
    acf_values: dict[int, np.ndarray]
    ess_values: dict[int, float] | None
    mess_value: float | None
    msjd_value: float
    wall_time: float | None
    ess_per_minute: dict[int, float] | None = None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "dim": self.dim,
            "monitored": list(self.monitored),
            "acf": {str(k): v.tolist() for k, v in self.acf_values.items()},
            "ess": None
            if self.ess_values is None
            else {str(k): v for k, v in self.ess_values.items()},
            "mess": self.mess_value,
            "msjd": self.msjd_value,
            "wall_time": self.wall_time,
            "ess_per_minute": None
            if self.ess_per_minute is None
            else {str(k): v for k, v in self.ess_per_minute.items()},
            "flags": list(self.flags),
        }


def diagnostics_report(
    trace: np.ndarray,
    wall_time: float | None = None,
    monitored: list[int] | None = None,
    max_lag: int = 50,
    include_ess: bool = True,
) -> DiagnosticsReport:
    """Assemble the standard report for one trace.

    `monitored` selects the coordinates given individual ACF/ESS treatment
    (defaults to first, middle, last). Set ``include_ess=False`` for
    unadjusted chains; jump distance and autocorrelations are still reported.
    """
    xs = _matrix(trace)
    n, p = xs.shape
    if monitored is None:
        monitored = sorted(set([0, p // 2, p - 1]))
    flags: list[str] = []
    acf_values = {int(j): acf(xs[:, j], max_lag=max_lag) for j in monitored}
    ess_values = None
    ess_per_minute = None
    mess_value = None
    if include_ess:
        ess_values = {int(j): ess(xs[:, j]) for j in monitored}
        if wall_time is not None and wall_time > 0.0:
            ess_per_minute = {
                j: v / (wall_time / 60.0) for j, v in ess_values.items()
            }
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                mess_value = mess(xs)
            except ValueError as exc:
                flags.append(f"mess unavailable: {exc}")
        for w in caught:
            flags.append(str(w.message))
    return DiagnosticsReport(
        n=n,
        dim=p,
        monitored=[int(j) for j in monitored],
        acf_values=acf_values,
        ess_values=ess_values,
        mess_value=mess_value,
        msjd_value=msjd(xs),
        wall_time=wall_time,
        ess_per_minute=ess_per_minute,
        flags=flags,
    )
