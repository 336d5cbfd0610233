"""CSV and JSON export of trajectories, measure series, sweep fields and exponents.

Trajectory CSV column order::

    t, A1_re, A1_im, A2_re, A2_im, B1_re, B1_im, B2_re, B2_im,
    C_0_0, C_0_1, ..., C_0_7, C_1_1, ..., C_7_7

The 36 covariance columns are the upper triangle in row-major order with
0-based indices into ``(x1, y1, x2, y2, q1, p1, q2, p2)``; they are present
only when the trajectory carries covariances.
"""

from __future__ import annotations

import csv
import json
import math
from importlib import metadata
from pathlib import Path

import numpy as np

__all__ = [
    "TRAJECTORY_MEAN_COLUMNS",
    "COV_COLUMNS",
    "MEASURE_COLUMNS",
    "tool_version",
    "write_json",
    "trajectory_rows",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_measures_csv",
    "write_sweep",
    "read_sweep_csv",
]

TRAJECTORY_MEAN_COLUMNS = ("t", "A1_re", "A1_im", "A2_re", "A2_im",
                           "B1_re", "B1_im", "B2_re", "B2_im")
COV_INDICES = tuple((i, j) for i in range(8) for j in range(i, 8))
COV_COLUMNS = tuple(f"C_{i}_{j}" for i, j in COV_INDICES)
MEASURE_COLUMNS = ("t", "theta", "sc_prime", "sp_prime", "mean_q_minus", "mean_p_minus")


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _fmt(v) -> str:
    # repr round-trips doubles exactly
    v = float(v)
    return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
    return path


def trajectory_rows(traj):
    iu = np.triu_indices(8)
    for k, t in enumerate(traj.times):
        z = traj.means[k]
        row = [_fmt(t)]
        for v in z:
            row += [_fmt(v.real), _fmt(v.imag)]
        if traj.covs is not None:
            row += [_fmt(v) for v in traj.covs[k][iu]]
        yield row


def write_trajectory_csv(path, traj) -> Path:
    header = list(TRAJECTORY_MEAN_COLUMNS) + (list(COV_COLUMNS) if traj.covs is not None else [])
    return _write_csv(path, header, trajectory_rows(traj))


def read_trajectory_csv(path):
    """Inverse of :func:`write_trajectory_csv`: ``(times, means, covs or None)``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(header))
    times = data[:, 0]
    means = data[:, 1:9:2] + 1j * data[:, 2:9:2]
    covs = None
    if len(header) == len(TRAJECTORY_MEAN_COLUMNS) + len(COV_COLUMNS):
        covs = np.zeros((len(times), 8, 8))
        iu = np.triu_indices(8)
        covs[:, iu[0], iu[1]] = data[:, 9:]
        covs[:, iu[1], iu[0]] = data[:, 9:]
    return times, means, covs


def write_measures_csv(path, ms) -> Path:
    cols = (ms.times, ms.theta, ms.sc_prime, ms.sp_prime, ms.mean_q_minus, ms.mean_p_minus)
    rows = ([_fmt(c[k]) for c in cols] for k in range(len(ms.times)))
    return _write_csv(path, MEASURE_COLUMNS, rows)


def write_sweep(stem, field, config_echo=None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (mu, lambda, value, status) and the ``<stem>.json`` header."""
    stem = Path(stem)
    g = field.grid
    rows = ([_fmt(mu), _fmt(lam), _fmt(field.values[i, j]), field.status[i, j]]
            for i, j, mu, lam in g.cells())
    csv_path = _write_csv(stem.with_suffix(".csv"), ("mu", "lambda", "value", "status"), rows)
    header = {
        "kind": field.kind,
        "grid": g.to_dict(),
        "mus": g.mus,
        "lambdas": g.lambdas,
        "meta": field.meta,
        "config": config_echo,
        "tool_version": tool_version(),
        "failed_cells": field.failed_cells(),
        "status_counts": {s: int(np.sum(field.status == s)) for s in sorted(set(field.status.ravel()))},
    }
    if field.classification is not None:
        header["classification"] = field.classification
        header["stderr"] = field.stderr
    json_path = write_json(stem.with_suffix(".json"), header)
    return csv_path, json_path


def read_sweep_csv(path):
    """``(mu, lambda, value, status)`` columns as arrays."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    mu = np.array([float(r[0]) for r in rows])
    lam = np.array([float(r[1]) for r in rows])
    val = np.array([float(r[2]) for r in rows])
    status = [r[3] for r in rows]
    return mu, lam, val, status
