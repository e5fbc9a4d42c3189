"""Shared fixtures: small frozen targets used across the module tests."""

import numpy as np
import pytest

from sglmm_mcmc.covariance import CovarianceModel, SiteSet, SpdMatrix, build_covariance
from sglmm_mcmc.glmm import GlmmSpec, simulate_data
from sglmm_mcmc.targets import GaussianTarget


def make_glmm(family: str, m: int, seed: int, trials: int = 40) -> GlmmSpec:
    """One simulated GLMM posterior on `m` random unit-square sites."""
    rng = np.random.default_rng(seed)
    sites = SiteSet(rng.uniform(size=(m, 2)))
    prior_cov = build_covariance(sites, CovarianceModel())
    prior_mean = np.where(sites.coords[:, 0] < 0.5, 1.7, -1.7)
    x_true = prior_mean + prior_cov.chol @ rng.standard_normal(m)
    trials_vec = np.full(m, trials, dtype=np.int64) if family == "binomial_logit" else None
    z = simulate_data(family, x_true, rng, trials=trials_vec)
    return GlmmSpec(
        family=family,
        z=z,
        prior_mean=prior_mean,
        prior_cov=prior_cov,
        trials=trials_vec,
    )


@pytest.fixture(scope="session")
def binomial_spec() -> GlmmSpec:
    return make_glmm("binomial_logit", m=6, seed=11)


@pytest.fixture(scope="session")
def poisson_spec() -> GlmmSpec:
    return make_glmm("poisson_log", m=6, seed=12)


@pytest.fixture(scope="session")
def gaussian_2d() -> GaussianTarget:
    cov = SpdMatrix.from_matrix(np.array([[2.0, 0.6], [0.6, 1.0]]))
    return GaussianTarget(mean=np.array([1.0, -2.0]), cov=cov)
