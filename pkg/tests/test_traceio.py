"""Trace persistence round trips."""

import math

import numpy as np
import pytest

from sglmm_mcmc.samplers import ChainTrace
from sglmm_mcmc.traceio import TRACE_FORMAT_VERSION, load_trace, save_trace

AWKWARD_STATES = np.array(
    [
        [1.0 / 3.0, 1e-300],
        [math.pi, -1.2345678901234567e18],
        [0.1, 7.0],
    ]
)


def _trace(adjusted=True):
    return ChainTrace(
        states=AWKWARD_STATES.copy(),
        accepted=np.array([True, False]) if adjusted else None,
        wall_time=1.5,
        step_size=0.25,
        algorithm="pcmala" if adjusted else "pcula",
    )


def test_npz_round_trip(tmp_path):
    path = save_trace(_trace(), tmp_path / "chain.npz")
    loaded = load_trace(path)
    np.testing.assert_array_equal(loaded.states, AWKWARD_STATES)
    np.testing.assert_array_equal(loaded.accepted, [True, False])
    assert loaded.accepted.dtype == bool
    assert loaded.wall_time == 1.5
    assert loaded.step_size == 0.25
    assert loaded.algorithm == "pcmala"


def test_npz_round_trip_unadjusted(tmp_path):
    loaded = load_trace(save_trace(_trace(adjusted=False), tmp_path / "chain.npz"))
    assert loaded.accepted is None
    assert loaded.algorithm == "pcula"


def test_csv_round_trip_is_bit_exact(tmp_path):
    # %.17g is enough digits to reproduce any double exactly.
    path = save_trace(_trace(), tmp_path / "chain.csv")
    loaded = load_trace(path)
    np.testing.assert_array_equal(loaded.states, AWKWARD_STATES)
    np.testing.assert_array_equal(loaded.accepted, [True, False])
    # The text form does not carry timing or tuning metadata.
    assert loaded.wall_time == 0.0
    assert loaded.step_size is None
    assert loaded.algorithm is None


def test_csv_layout(tmp_path):
    path = save_trace(_trace(), tmp_path / "chain.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == f"# mcmc-trace-format: {TRACE_FORMAT_VERSION}"
    assert lines[1] == "x1,x2,accepted"
    # No transition leads into the initial state, so its flag field is empty.
    assert lines[2].endswith(",")
    assert lines[3].endswith(",1")


def test_csv_unadjusted_has_no_flag_column(tmp_path):
    path = save_trace(_trace(adjusted=False), tmp_path / "chain.csv")
    assert path.read_text().splitlines()[1] == "x1,x2"
    assert load_trace(path).accepted is None


def test_csv_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("x1,x2\n0.0,1.0\n")
    with pytest.raises(ValueError, match="format header"):
        load_trace(path)


def test_csv_rejects_future_version(tmp_path):
    good = save_trace(_trace(), tmp_path / "chain.csv")
    lines = good.read_text().splitlines()
    lines[0] = "# mcmc-trace-format: 99"
    bad = tmp_path / "future.csv"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="version 99"):
        load_trace(bad)


def test_npz_rejects_future_version(tmp_path):
    path = tmp_path / "future.npz"
    np.savez(path, format_version=np.array(99), states=AWKWARD_STATES, wall_time=np.array(0.0))
    with pytest.raises(ValueError, match="version 99"):
        load_trace(path)


def test_unknown_suffix_is_rejected(tmp_path):
    with pytest.raises(ValueError, match="npz or .csv"):
        save_trace(_trace(), tmp_path / "chain.txt")
    with pytest.raises(ValueError, match="npz or .csv"):
        load_trace(tmp_path / "chain.txt")
