"""Trace persistence: a columnar binary form (.npz) and a CSV form.

Both carry a format version so later readers can refuse what they do not
understand. CSV rows are one iteration each, coordinates then an accepted
flag; the flag column is absent for unadjusted kernels and empty on the
first row (no transition leads into the initial state).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .samplers import ChainTrace

__all__ = ["TRACE_FORMAT_VERSION", "load_trace", "save_trace"]

TRACE_FORMAT_VERSION = 1
_CSV_MAGIC = "# mcmc-trace-format:"


def save_trace(trace: ChainTrace, path: str | Path) -> Path:
    """Write `trace` to `path`; the suffix picks the format (.npz or .csv)."""
    path = Path(path)
    if path.suffix == ".npz":
        payload = {
            "format_version": np.array(TRACE_FORMAT_VERSION),
            "states": trace.states,
            "wall_time": np.array(trace.wall_time),
        }
        if trace.accepted is not None:
            payload["accepted"] = trace.accepted
        if trace.step_size is not None:
            payload["step_size"] = np.array(trace.step_size)
        if trace.algorithm is not None:
            payload["algorithm"] = np.array(trace.algorithm)
        np.savez_compressed(path, **payload)
        return path
    if path.suffix == ".csv":
        n, dim = trace.states.shape
        header = [f"x{j + 1}" for j in range(dim)]
        if trace.accepted is not None:
            header.append("accepted")
        with open(path, "w", newline="") as fh:
            fh.write(f"{_CSV_MAGIC} {TRACE_FORMAT_VERSION}\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(n):
                row = [f"{v:.17g}" for v in trace.states[i]]
                if trace.accepted is not None:
                    row.append("" if i == 0 else str(int(trace.accepted[i - 1])))
                writer.writerow(row)
        return path
    raise ValueError(f"unsupported trace format {path.suffix!r} (use .npz or .csv)")


def load_trace(path: str | Path) -> ChainTrace:
    """Read a trace written by :func:`save_trace`."""
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path, allow_pickle=False) as data:
            version = int(data["format_version"])
            if version != TRACE_FORMAT_VERSION:
                raise ValueError(f"unsupported trace format version {version}")
            accepted = data["accepted"].astype(bool) if "accepted" in data else None
            step_size = float(data["step_size"]) if "step_size" in data else None
            algorithm = str(data["algorithm"]) if "algorithm" in data else None
            return ChainTrace(
                states=np.array(data["states"], dtype=float),
                accepted=accepted,
                wall_time=float(data["wall_time"]),
                step_size=step_size,
                algorithm=algorithm,
            )
    if path.suffix == ".csv":
        with open(path, newline="") as fh:
            magic = fh.readline().strip()
            if not magic.startswith(_CSV_MAGIC):
                raise ValueError("not a trace CSV (missing format header)")
            version = int(magic.removeprefix(_CSV_MAGIC).strip())
            if version != TRACE_FORMAT_VERSION:
                raise ValueError(f"unsupported trace format version {version}")
            reader = csv.reader(fh)
            header = next(reader)
            has_flags = header and header[-1] == "accepted"
            dim = len(header) - (1 if has_flags else 0)
            states, flags = [], []
            for row in reader:
                states.append([float(v) for v in row[:dim]])
                if has_flags and row[dim] != "":
                    flags.append(bool(int(row[dim])))
        return ChainTrace(
            states=np.asarray(states, dtype=float),
            accepted=np.asarray(flags, dtype=bool) if has_flags else None,
            wall_time=0.0,
            step_size=None,
            algorithm=None,
        )
    raise ValueError(f"unsupported trace format {path.suffix!r} (use .npz or .csv)")
