"""CSV/JSON export and re-ingest. Output is deterministic byte-for-byte."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .lifted import LiftedTrajectory
from .operators import matrix_to_json

TRAJECTORY_COLUMNS = ["t", "trace_dev", "min_eig", "V", "dVdt", "dist_to_symm"]
LIFTED_COLUMNS = ["t", "D", "min_p", "max_p"]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(x) for x in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def trajectory_csv(traj: Trajectory) -> str:
    return rows_to_csv(traj.rows(), TRAJECTORY_COLUMNS)


def lifted_csv(traj: LiftedTrajectory) -> str:
    return rows_to_csv(traj.rows(), LIFTED_COLUMNS)


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def state_snapshots_json(traj: Trajectory, stride: int) -> str:
    snaps = [
        {"t": float(t), "state": matrix_to_json(rho)}
        for i, (t, rho) in enumerate(zip(traj.times, traj.states))
        if i % stride == 0 or i == len(traj.times) - 1
    ]
    return to_json(snaps)


def weights_snapshots_json(traj: LiftedTrajectory, stride: int) -> str:
    snaps = [
        {"t": float(t), "p": w.tolist()}
        for i, (t, w) in enumerate(zip(traj.times, traj.weights))
        if i % stride == 0 or i == len(traj.times) - 1
    ]
    return to_json(snaps)


def write_outputs(out_dir, files: dict[str, str]) -> list[Path]:
    """Write every file at once, after all computation has succeeded."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        paths.append(path)
    return paths
