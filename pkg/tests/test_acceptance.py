"""End-to-end acceptance checks for the package.

Each test pins its tolerances and seeds and asserts its own runtime budget.
They are slower than the unit tests and exercise whole workflows: derivative
exactness, kernel equivalences, stationary laws, the radial constant, the
step-size bounds, drift behavior at large radius, desk-scale efficiency and
convergence patterns, the diagnostics oracles, and the step-size tuner.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from conftest import make_glmm
from scipy.signal import lfilter
from scipy.stats import norm

from sglmm_mcmc.covariance import SpdMatrix
from sglmm_mcmc.diagnostics import batch_means_variance, ess, mess, mpsrf, msjd
from sglmm_mcmc.ergodicity import (
    DriftSpec,
    c2,
    drift_ratio,
    log_c2,
    non_ge_drift_check,
    pcmala_h_bound,
)
from sglmm_mcmc.harness import ExperimentConfig, run_comparison
from sglmm_mcmc.samplers import Kernel, SamplerConfig, run_chain, tune_step_size
from sglmm_mcmc.targets import GaussianTarget


def _rel_err(approx: np.ndarray, exact: np.ndarray) -> float:
    approx = np.atleast_1d(np.asarray(approx, dtype=float))
    exact = np.atleast_1d(np.asarray(exact, dtype=float))
    return float(np.linalg.norm(approx - exact) / max(1.0, np.linalg.norm(exact)))


def _config(algorithm, dim, *, h, seed, kind=None, x0=None):
    if kind is None:
        kind = "position_dependent" if algorithm in ("pmala", "mmala") else "identity"
    return SamplerConfig(
        algorithm=algorithm,
        step_size=h,
        seed=seed,
        initial_state=np.zeros(dim) if x0 is None else x0,
        preconditioner=kind,
    )


def test_derivatives_match_finite_differences():
    # Gradient, curvature diagonal, and third-derivative diagonal against
    # central differences, across both families and a spread of dimensions.
    start = time.perf_counter()
    eps_grad, eps_hess, eps_third = 5e-6, 5e-6, 5e-5
    for family in ("binomial_logit", "poisson_log"):
        for m in (1, 8, 20):
            spec = make_glmm(family, m, seed=100 + m)
            rng = np.random.default_rng(m)
            for _ in range(50):
                x = spec.prior_mean + rng.normal(size=m)

                grad_fd = np.empty(m)
                hess_fd = np.empty(m)
                third_fd = np.empty(m)
                for j in range(m):
                    e = np.zeros(m)
                    e[j] = 1.0
                    grad_fd[j] = (
                        spec.log_target(x + eps_grad * e) - spec.log_target(x - eps_grad * e)
                    ) / (2.0 * eps_grad)
                    hess_fd[j] = (
                        spec.grad_log_target(x + eps_hess * e)[j]
                        - spec.grad_log_target(x - eps_hess * e)[j]
                    ) / (2.0 * eps_hess)
                    third_fd[j] = -(
                        spec.neg_hessian(x + eps_third * e)[j, j]
                        - spec.neg_hessian(x - eps_third * e)[j, j]
                    ) / (2.0 * eps_third)

                assert _rel_err(grad_fd, spec.grad_log_target(x)) < 1e-6
                assert _rel_err(hess_fd, -np.diag(spec.neg_hessian(x))) < 1e-5
                assert _rel_err(third_fd, spec.third_diag(x)) < 1e-5
    assert time.perf_counter() - start < 10.0


def test_position_dependent_kernels_coincide_for_binomial():
    # With the logit link the third-derivative tensor is diagonal, so the
    # log-determinant correction cancels and the two position-dependent
    # kernels share one proposal law and, seeded identically, one trajectory.
    start = time.perf_counter()
    spec = make_glmm("binomial_logit", 20, seed=202)
    pmala = Kernel(spec, _config("pmala", 20, h=0.5, seed=0))
    mmala = Kernel(spec, _config("mmala", 20, h=0.5, seed=0))
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = spec.prior_mean + rng.normal(size=20)
        a = pmala.state_at(x).proposal
        b = mmala.state_at(x).proposal
        assert float(np.max(np.abs(a.mean - b.mean))) < 1e-10
        assert float(np.max(np.abs(a.chol - b.chol))) < 1e-10
        assert abs(a.log_det - b.log_det) < 1e-10

    first = run_chain(_config("pmala", 20, h=0.5, seed=77, x0=spec.prior_mean), spec, 1000)
    second = run_chain(_config("mmala", 20, h=0.5, seed=77, x0=spec.prior_mean), spec, 1000)
    np.testing.assert_array_equal(first.accepted, second.accepted)
    np.testing.assert_allclose(first.states, second.states, atol=1e-8)
    assert time.perf_counter() - start < 5.0


def test_adjusted_kernels_preserve_the_gaussian_law(gaussian_2d):
    # Long chains from every accept-reject kernel must reproduce the target
    # mean and marginal variances within batch-means error bars.
    start = time.perf_counter()
    n = 100_000
    truth_mean = gaussian_2d.mean
    truth_var = np.diag(gaussian_2d.cov.matrix)
    runs = [
        ("rwm", "identity", 1.0, 31),
        ("pcmala", "prior_cov", 0.8, 32),
        ("pmala", None, 0.8, 33),
        ("mmala", None, 0.8, 34),
    ]
    for algorithm, kind, h, seed in runs:
        config = _config(algorithm, 2, h=h, seed=seed, kind=kind, x0=truth_mean.copy())
        trace = run_chain(config, gaussian_2d, n)
        for j in range(2):
            series = trace.states[:, j]
            sigma2, a, b = batch_means_variance(series)
            used = series[: a * b]
            se_mean = math.sqrt(sigma2 / (a * b))
            assert abs(used.mean() - truth_mean[j]) < 5.0 * se_mean, (algorithm, j)

            squares = (used - used.mean()) ** 2
            sigma2_sq, a2, b2 = batch_means_variance(squares)
            se_var = math.sqrt(sigma2_sq / (a2 * b2))
            assert abs(squares.mean() - truth_var[j]) < 5.0 * se_var, (algorithm, j)
    assert time.perf_counter() - start < 30.0


def test_unadjusted_chain_matches_its_autoregressive_law():
    # On a standard normal target the unadjusted chain is the AR(1) process
    # X' = (1 - h/2) X + sqrt(h) eps with stationary variance
    # h / (1 - (1 - h/2)^2); at h = 0.5 that is 8/7.
    start = time.perf_counter()
    h = 0.5
    target = GaussianTarget(mean=np.zeros(1), cov=SpdMatrix.identity(1))
    trace = run_chain(_config("pcula", 1, h=h, seed=35), target, 100_000)
    series = trace.states[:, 0]
    truth = h / (1.0 - (1.0 - h / 2.0) ** 2)
    assert truth == pytest.approx(8.0 / 7.0, rel=1e-12)
    squares = (series - series.mean()) ** 2
    sigma2, a, b = batch_means_variance(squares)
    se = math.sqrt(sigma2 / (a * b))
    assert abs(squares[: a * b].mean() - truth) < 5.0 * se
    assert time.perf_counter() - start < 5.0


def test_radial_constant_closed_form():
    # In one dimension the radial constant has the closed form
    # 2 exp(h s^2 / 2) Phi(s sqrt(h)), and it tends to one as s -> 0.
    for h in np.linspace(0.1, 2.0, 10):
        for s in np.linspace(0.1, 3.0, 10):
            expected = math.log(2.0) + 0.5 * h * s * s + norm.logcdf(s * math.sqrt(h))
            assert log_c2(float(s), float(h), 1) == pytest.approx(expected, abs=1e-8)
    for h in (0.1, 1.0, 2.0):
        assert c2(1e-6, h, 1) == pytest.approx(1.0, abs=1e-4)


def test_step_size_bound_is_exact_and_scale_consistent():
    assert pcmala_h_bound(np.eye(2), np.eye(2)) == 4.0
    rng = np.random.default_rng(123)
    for _ in range(5):
        a = rng.normal(size=(4, 4))
        sigma = a @ a.T + 4.0 * np.eye(4)
        b = rng.normal(size=(4, 4))
        g = b @ b.T + 4.0 * np.eye(4)
        c = float(rng.uniform(0.1, 10.0))
        assert pcmala_h_bound(c * sigma, g) == pytest.approx(
            c * pcmala_h_bound(sigma, g), rel=1e-12
        )


def test_drift_ratio_contracts_far_from_the_mode():
    # Monte Carlo one-step drift of the preconditioned Langevin kernel below
    # its step-size bound: the quadratic drift function must contract at
    # radius 50 in every probed direction.
    start = time.perf_counter()
    spec = make_glmm("binomial_logit", 20, seed=2024)
    bound = pcmala_h_bound(spec.prior_cov, SpdMatrix.identity(20))
    kernel = Kernel(spec, _config("pcmala", 20, h=0.5 * bound, seed=0))
    drift = DriftSpec("quadratic")
    directions = np.random.default_rng(777).normal(size=(10, 20))
    for i, direction in enumerate(directions):
        x = 50.0 * direction / np.linalg.norm(direction)
        estimate, se = drift_ratio(kernel, drift, x, 100_000, np.random.default_rng(i))
        assert estimate + 3.0 * se < 1.0, (i, estimate, se)
    assert time.perf_counter() - start < 60.0


def test_poisson_langevin_growth_rules_out_geometric_ergodicity():
    # The log-link gradient grows like e^r along the positive first axis, so
    # the relative proposal-mean displacement blows past 2/h by radius 20 and
    # keeps growing; this is the deterministic necessary-condition failure.
    start = time.perf_counter()
    spec = make_glmm("poisson_log", 50, seed=404)
    for h in (0.1, 1.0):
        report = non_ge_drift_check(spec, h)
        assert report.verdict == "violated"
        (row,) = report.details["per_ray"]
        assert np.all(np.diff(row) > 0.0)
        assert row[-1] > 2.0 / h
    assert time.perf_counter() - start < 1.0


def test_efficiency_orderings_at_desk_scale(tmp_path):
    # Multivariate ESS ordering: curvature-at-the-mode preconditioning beats
    # the position-dependent kernel, which beats the identity. Jump-distance
    # ordering: the same leaders beat prior-covariance preconditioning.
    # Required in at least two of three seeds.
    start = time.perf_counter()
    roster = ("pcmala:identity", "pcmala:prior_cov", "pcmala:mode_info_inv", "pmala")
    successes = 0
    details = []
    for seed in (1, 2, 3):
        config = ExperimentConfig.desk_profile(seed=seed, algorithms=roster, start_count=1)
        result = run_comparison(config, tmp_path / f"seed-{seed}")
        by_tag = {r.tag: r for r in result.results}
        assert all(r.error is None for r in result.results), by_tag
        mess_of = {tag: by_tag[tag].report.mess_value for tag in by_tag}
        msjd_of = {tag: by_tag[tag].report.msjd_value for tag in by_tag}
        mess_ok = (
            mess_of["pcmala-mode_info_inv"] > mess_of["pmala"] > mess_of["pcmala-identity"]
        )
        msjd_ok = (
            msjd_of["pcmala-mode_info_inv"] > msjd_of["pmala"] > msjd_of["pcmala-prior_cov"]
        )
        successes += mess_ok and msjd_ok
        details.append((seed, mess_of, msjd_of))
    assert successes >= 2, details
    assert time.perf_counter() - start < 900.0


def test_convergence_separation_at_desk_scale(tmp_path):
    # Five overdispersed starts: curvature preconditioning should cross the
    # 1.1 convergence line inside the first quarter of the run while identity
    # preconditioning stays above it to the end, in two of three seeds.
    start = time.perf_counter()
    roster = ("pcmala:identity", "pcmala:mode_info_inv")
    successes = 0
    details = []
    for seed in (1, 2, 3):
        config = ExperimentConfig.desk_profile(seed=seed, algorithms=roster, start_count=5)
        result = run_comparison(config, tmp_path / f"seed-{seed}")
        by_tag = {r.tag: r for r in result.results}
        assert all(r.error is None for r in result.results), by_tag
        quarter = config.iterations // 4
        crossing = by_tag["pcmala-mode_info_inv"].rhat.first_below(1.1)
        identity_final = by_tag["pcmala-identity"].rhat.final()
        fast_ok = crossing is not None and crossing <= quarter
        slow_ok = identity_final > 1.1
        successes += fast_ok and slow_ok
        details.append((seed, crossing, identity_final))
    assert successes >= 2, details
    assert time.perf_counter() - start < 900.0


def test_diagnostics_oracles():
    # AR(1) effective sample size, the univariate reduction of the
    # multivariate ESS, the jump-distance hand value, and the exact MPSRF
    # floor for identical chains.
    n = 250_000
    eps = np.random.default_rng(55).standard_normal(n + 2000)
    series = lfilter([1.0], [1.0, -0.9], eps)[2000:]
    assert ess(series) == pytest.approx(n / 19.0, rel=0.25)
    assert mess(series[:10_000, None]) == pytest.approx(ess(series[:10_000]), rel=1e-12)

    assert msjd(np.array([0.0, 1.0, 3.0])) == 2.5

    y = np.random.default_rng(56).standard_normal((60, 2))
    trajectory = mpsrf([y, y.copy(), y.copy()], checkpoints=[10, 30, 60])
    np.testing.assert_array_equal(
        trajectory.values, [9.0 / 10.0, 29.0 / 30.0, 59.0 / 60.0]
    )


def test_tuned_step_size_holds_on_a_fresh_chain():
    # The tuner targets (0.60, 0.70) on pilot chains; a fresh 5,000-step run
    # at the returned h must land in the widened band (0.55, 0.75).
    start = time.perf_counter()
    spec = make_glmm("binomial_logit", 50, seed=31)
    template = SamplerConfig(
        algorithm="pcmala",
        step_size=1.0,
        seed=9,
        initial_state=spec.find_mode(),
        preconditioner="prior_cov",
    )
    h = tune_step_size(template, spec)
    fresh = run_chain(replace(template, step_size=h, seed=999), spec, 5000)
    assert 0.55 < fresh.acceptance_rate < 0.75, (h, fresh.acceptance_rate)
    assert time.perf_counter() - start < 120.0
