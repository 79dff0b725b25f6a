"""CSV and JSON output formats.

Floats are written with ``repr``, the shortest decimal string that reads
back to the same 64-bit value.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .analysis import ConvergenceTable
from .integrate import Trajectory
from .state import moment


def fmt(x: float) -> str:
    return repr(float(x))


def write_timeseries(path: Path, trajectory: Trajectory) -> None:
    N = trajectory.samples[0].state.N
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"c_{i}" for i in range(N + 1)])
        for s in trajectory.samples:
            w.writerow([fmt(s.state.time)] + [fmt(v) for v in s.state.values])


def read_timeseries(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Return (times, values[n_samples, N + 1])."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[0] != "t" or header[1:] != [f"c_{i}" for i in range(len(header) - 1)]:
            raise ValueError(f"{path}: unexpected header {header[:3]}...")
        rows = [[float(x) for x in row] for row in r if row]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return arr[:, 0], arr[:, 1:]


def moment_summary(times: Iterable[float], values: np.ndarray) -> dict:
    """Drift and final-moment fields of the run summary, from raw samples."""
    p0 = [moment(v, 0) for v in values]
    p1 = [moment(v, 1) for v in values]
    last = values[-1]
    return {
        "p0_drift": max(abs(x - p0[0]) for x in p0),
        "p1_drift": max(abs(x - p1[0]) for x in p1),
        "final_moments": {"t": float(list(times)[-1]), "p0": p0[-1], "p1": p1[-1], "p2": moment(last, 2)},
    }


def summarize_timeseries(path: Path) -> dict:
    times, values = read_timeseries(path)
    return moment_summary(times, values)


def write_sweep(path: Path, table: ConvergenceTable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "t", "N", "c", "delta_prev"])
        for i, t, N, c, d in table.rows:
            w.writerow([i, fmt(t), N, fmt(c), "" if d is None else fmt(d)])


def read_sweep(path: Path) -> list[tuple[int, float, int, float, float | None]]:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        return [(int(row["i"]), float(row["t"]), int(row["N"]), float(row["c"]),
                 None if row["delta_prev"] == "" else float(row["delta_prev"])) for row in r]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def to_json_text(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2) + "\n"


def write_json(path: Path, payload: dict) -> None:
    Path(path).write_text(to_json_text(payload))
