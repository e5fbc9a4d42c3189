"""Output analysis: ACF, effective sample sizes, jump distance, MPSRF."""

import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import lfilter

from sglmm_mcmc.diagnostics import (
    MpsrfTrajectory,
    acf,
    batch_means_variance,
    diagnostics_report,
    ess,
    mess,
    mpsrf,
    msjd,
)


def ar1(n, phi, seed, warmup=2000):
    eps = np.random.default_rng(seed).standard_normal(n + warmup)
    return lfilter([1.0], [1.0, -phi], eps)[warmup:]


_AFFINE_SERIES = ar1(2000, 0.5, seed=77)


# -- autocorrelation ------------------------------------------------------------


def test_acf_hand_values():
    # Biased normalization (divide by n at every lag) on [1, 2, 3, 4].
    values = acf(np.array([1.0, 2.0, 3.0, 4.0]), max_lag=3)
    np.testing.assert_allclose(values, [1.0, 0.25, -0.3, -0.45], rtol=1e-12)


def test_acf_iid_is_inside_the_noise_band():
    n = 20000
    series = np.random.default_rng(5).standard_normal(n)
    values = acf(series, max_lag=10)
    assert values[0] == 1.0
    assert np.all(np.abs(values[1:]) < 5.0 / math.sqrt(n))


def test_acf_ar1_geometric_decay():
    series = ar1(50000, 0.9, seed=6)
    values = acf(series, max_lag=5)
    for k in (1, 2, 5):
        assert values[k] == pytest.approx(0.9**k, abs=0.02)


def test_acf_validation():
    with pytest.raises(ValueError, match="zero variance"):
        acf(np.ones(100))
    with pytest.raises(ValueError, match="shorter"):
        acf(np.arange(10.0), max_lag=10)
    with pytest.raises(ValueError, match="nonnegative"):
        acf(np.arange(100.0), max_lag=-1)
    with pytest.raises(ValueError, match="one-dimensional"):
        acf(np.zeros((10, 2)))


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(0.1, 5.0), flip=st.booleans(), shift=st.floats(-10.0, 10.0))
def test_acf_affine_invariance(scale, flip, shift):
    a = -scale if flip else scale
    np.testing.assert_allclose(
        acf(a * _AFFINE_SERIES + shift, max_lag=8),
        acf(_AFFINE_SERIES, max_lag=8),
        rtol=1e-9,
        atol=1e-12,
    )


# -- batch means and effective sample size ------------------------------------------


def test_batch_means_hand_value():
    # Ten batches of ten with means alternating 0 and 1: variance of the
    # means is 2.5/9, scaled by the batch size.
    series = np.repeat([0.0, 1.0] * 5, 10)
    sigma2, a, b = batch_means_variance(series)
    assert (a, b) == (10, 10)
    assert sigma2 == pytest.approx(25.0 / 9.0, rel=1e-12)


def test_batch_means_uses_leading_complete_batches():
    _, a, b = batch_means_variance(np.random.default_rng(0).standard_normal(119))
    assert (a, b) == (11, 10)


def test_batch_means_needs_enough_samples():
    with pytest.raises(ValueError, match="at least 100"):
        batch_means_variance(np.zeros(99))


def test_ess_iid_is_near_n():
    n = 250000
    series = np.random.default_rng(7).standard_normal(n)
    assert ess(series) == pytest.approx(n, rel=0.20)


def test_ess_ar1_matches_theory():
    # AR(1) with phi = 0.9 has asymptotic efficiency (1 - phi)/(1 + phi) = 1/19.
    n = 250000
    series = ar1(n, 0.9, seed=8)
    assert ess(series) == pytest.approx(n / 19.0, rel=0.25)


def test_ess_validation():
    with pytest.raises(ValueError, match="zero variance"):
        ess(np.ones(200))
    with pytest.raises(ValueError, match="constant"):
        # Alternating series: every batch of 100 has mean exactly one half.
        ess(np.tile([0.0, 1.0], 5000))


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(0.1, 5.0), flip=st.booleans(), shift=st.floats(-10.0, 10.0))
def test_ess_affine_invariance(scale, flip, shift):
    a = -scale if flip else scale
    assert ess(a * _AFFINE_SERIES + shift) == pytest.approx(ess(_AFFINE_SERIES), rel=1e-9)


# -- multivariate effective sample size ----------------------------------------------


def test_mess_reduces_to_ess_in_one_dimension():
    series = ar1(10000, 0.8, seed=9)
    assert mess(series[:, None]) == pytest.approx(ess(series), rel=1e-12)


def test_mess_iid_is_near_n():
    n = 40000
    trace = np.random.default_rng(10).standard_normal((n, 3))
    assert mess(trace) == pytest.approx(n, rel=0.2)


def test_mess_caps_dimension_at_batch_count():
    trace = np.random.default_rng(11).standard_normal((100, 12))
    with pytest.warns(UserWarning, match="evenly spaced"):
        value = mess(trace)
    assert np.isfinite(value) and value > 0.0


def test_mess_rejects_degenerate_traces():
    y = np.random.default_rng(12).standard_normal(400)
    with pytest.raises(ValueError, match="not positive definite"):
        mess(np.column_stack([y, y]))
    with pytest.raises(ValueError, match="at least 100"):
        mess(np.zeros((50, 2)))


# -- mean squared jump distance --------------------------------------------------------


def test_msjd_hand_values():
    assert msjd(np.array([0.0, 1.0, 3.0])) == 2.5
    assert msjd(np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 2.0]])) == 1.5
    assert msjd(np.full((10, 3), 7.0)) == 0.0
    with pytest.raises(ValueError, match="two states"):
        msjd(np.zeros((1, 2)))


# -- multivariate PSRF -------------------------------------------------------------------


def test_mpsrf_identical_chains_gives_exact_floor():
    y = np.random.default_rng(13).standard_normal((60, 2))
    trajectory = mpsrf([y, y.copy(), y.copy()], checkpoints=[10, 30, 60])
    np.testing.assert_array_equal(trajectory.iterations, [10, 30, 60])
    np.testing.assert_array_equal(trajectory.values, [9.0 / 10.0, 29.0 / 30.0, 59.0 / 60.0])


def test_mpsrf_iid_chains_settle_near_one():
    rng = np.random.default_rng(14)
    chains = [rng.standard_normal((2000, 3)) for _ in range(4)]
    assert abs(mpsrf(chains).final() - 1.0) < 0.05


def test_mpsrf_separated_chains_stay_large():
    rng = np.random.default_rng(15)
    chains = [
        rng.standard_normal((500, 2)),
        rng.standard_normal((500, 2)) + 10.0,
    ]
    assert mpsrf(chains).final() > 10.0


def test_mpsrf_singular_within_is_flagged_not_fabricated():
    rng = np.random.default_rng(16)
    chains = []
    for _ in range(2):
        c = rng.standard_normal((50, 2))
        c[:, 1] = 0.0
        chains.append(c)
    assert math.isnan(mpsrf(chains).final())


def test_mpsrf_validation():
    y = np.random.default_rng(17).standard_normal((50, 2))
    with pytest.raises(ValueError, match="two chains"):
        mpsrf([y])
    with pytest.raises(ValueError, match="same shape"):
        mpsrf([y, y[:40]])
    with pytest.raises(ValueError, match="too early"):
        mpsrf([y, y.copy()], checkpoints=[2, 50])
    with pytest.raises(ValueError, match="beyond"):
        mpsrf([y, y.copy()], checkpoints=[60])


def test_mpsrf_affine_invariance():
    rng = np.random.default_rng(18)
    chains = [rng.standard_normal((400, 2)) + rng.normal() for _ in range(3)]
    a = np.array([[2.0, 0.3], [-0.5, 1.0]])
    b = np.array([1.0, -2.0])
    checkpoints = [50, 200, 400]
    base = mpsrf(chains, checkpoints)
    mapped = mpsrf([c @ a.T + b for c in chains], checkpoints)
    np.testing.assert_allclose(mapped.values, base.values, rtol=1e-8)


def test_trajectory_queries():
    trajectory = MpsrfTrajectory(
        iterations=np.array([10, 20, 30]), values=np.array([2.0, 1.05, 1.01])
    )
    assert trajectory.final() == 1.01
    assert trajectory.first_below(1.1) == 20
    assert trajectory.first_below(1.0) is None


# -- assembled report ----------------------------------------------------------------------


def test_report_fields_and_serialization():
    rng = np.random.default_rng(19)
    trace = rng.standard_normal((2000, 5))
    report = diagnostics_report(trace, wall_time=60.0)
    assert report.monitored == [0, 2, 4]
    assert set(report.ess_values) == {0, 2, 4}
    # Sixty seconds is one minute, so the rate equals the raw ESS.
    assert report.ess_per_minute == report.ess_values
    assert report.mess_value > 0.0
    assert report.flags == []
    payload = json.loads(json.dumps(report.to_dict()))
    assert payload["n"] == 2000
    assert len(payload["acf"]["0"]) == 51


def test_report_for_unadjusted_chain():
    trace = np.random.default_rng(20).standard_normal((500, 3))
    report = diagnostics_report(trace, include_ess=False)
    assert report.ess_values is None
    assert report.mess_value is None
    assert report.ess_per_minute is None
    assert report.msjd_value > 0.0
    assert set(report.acf_values) == {0, 1, 2}


def test_report_flags_capped_mess_without_leaking_warnings():
    trace = np.random.default_rng(21).standard_normal((100, 12))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        report = diagnostics_report(trace, monitored=[0], max_lag=10)
    assert any("evenly spaced" in flag for flag in report.flags)


def test_report_flags_unavailable_mess():
    y = np.random.default_rng(22).standard_normal(400)
    report = diagnostics_report(np.column_stack([y, y]), monitored=[0, 1])
    assert report.mess_value is None
    assert any("mess unavailable" in flag for flag in report.flags)
    assert set(report.ess_values) == {0, 1}
