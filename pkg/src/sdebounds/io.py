"""Text formats for trajectories, matrices and experiment tables.

Numbers are written with 17 significant digits so every file re-parses to
the exact doubles it was written from.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .sde import Trajectory

FMT = "%.17g"


def write_trajectory_csv(traj: Trajectory, path, every: int = 1) -> None:
    """Header ``t,x_0,...,x_{dim-1}``; one row per (kept) step, time first."""
    idx = np.arange(0, traj.states.shape[0], every)
    data = np.column_stack([traj.times[idx], traj.states[idx]])
    header = ",".join(["t"] + [f"x_{i}" for i in range(traj.dim)])
    np.savetxt(path, data, fmt=FMT, delimiter=",", header=header, comments="")


def read_trajectory_csv(path, seed=None) -> Trajectory:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "t" or any(h != f"x_{i}" for i, h in enumerate(header[1:])):
        raise ValueError(f"{path}: not a trajectory file (bad header)")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    eta = float(t[1] - t[0]) if t.size > 1 else 0.0
    return Trajectory(eta=eta, states=np.ascontiguousarray(data[:, 1:]), seed=seed)


def write_matrix(A, path) -> None:
    """``p <dim>`` then ``i j value`` (0-based) for every nonzero entry."""
    A = np.asarray(A, dtype=float)
    lines = [f"p {A.shape[0]}"]
    for i, j in zip(*np.nonzero(A)):
        lines.append(f"{i} {j} {FMT % A[i, j]}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0][0] != "p" or len(lines[0]) != 2:
        raise ValueError(f"{path}: first line must be 'p <dim>'")
    p = int(lines[0][1])
    A = np.zeros((p, p))
    for ln in lines[1:]:
        if len(ln) != 3:
            raise ValueError(f"{path}: bad entry line {' '.join(ln)!r}")
        i, j = int(ln[0]), int(ln[1])
        if not (0 <= i < p and 0 <= j < p):
            raise ValueError(f"{path}: index ({i}, {j}) out of range")
        A[i, j] = float(ln[2])
    return A


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


SWEEP_COLUMNS = ["p", "k_or_density", "T", "trials", "successes", "success_rate"]


def write_sweep_csv(rows, path) -> None:
    """Rows are dicts with the ``SWEEP_COLUMNS`` keys."""
    write_rows_csv(rows, path, SWEEP_COLUMNS)


def write_rows_csv(rows, path, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_rows_csv(path):
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (float, np.floating)):
        return FMT % v
    return str(v)


def _parse(s):
    if s == "":
        return None
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s
