"""Deterministic writers for trajectories, reports and agent draws."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dynamics import AgentParams, Trajectory


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, allow_nan=True) + "\n"


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(dumps(obj))


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_csv(traj: Trajectory) -> str:
    n = traj.theta.shape[1]
    header = ["k"] + [f"theta_{i}" for i in range(n)] + [f"u_{i}" for i in range(n)]
    lines = [",".join(header)]
    for k in range(traj.theta.shape[0]):
        row = [str(k)] + [format_float(v) for v in traj.theta[k]] + [format_float(v) for v in traj.u[k]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    Path(path).write_text(trajectory_csv(traj))


def read_trajectory_csv(path: str | Path) -> Trajectory:
    rows = Path(path).read_text().strip().splitlines()
    header = rows[0].split(",")
    n = (len(header) - 1) // 2
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    return Trajectory(data[:, 1 : 1 + n], data[:, 1 + n :])


def agents_dict(p: AgentParams) -> dict:
    return {"c": p.c, "g": p.g, "theta0": p.theta0, "phi": p.phi.to_dict()}
