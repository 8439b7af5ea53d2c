"""Coupled opinion/action dynamics on a fixed graph.

Opinions follow a DeGroot-style averaging with self-confidence weights,

    theta(k+1) = (D + C)^{-1} (A + C) theta(k),

and every agent then plays the best response of a one-step game against the
last actions of its neighbours,

    u(k+1) = G_theta Phi(theta(k+1)) - G_u A u(k),

with ``G_u = diag(g_i / (g_i + (d_i+1)^2))`` and ``G_theta = I + G_u D``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .netgraph import Graph, connected_components, degrees

__all__ = [
    "ActionMap",
    "AgentParams",
    "SystemMatrices",
    "Trajectory",
    "ComponentConsensus",
    "manipulation_gain",
    "build_system_matrices",
    "opinion_step",
    "action_step",
    "action_step_scalar",
    "agent_cost",
    "simulate",
    "consensus_check",
    "DEFAULT_DIVERGENCE_THRESHOLD",
    "sample_agents",
]

DEFAULT_DIVERGENCE_THRESHOLD = 1e9

ActionKind = Literal["scaled_tanh", "identity", "affine"]


@dataclass(frozen=True)
class ActionMap:
    """Map from an opinion to the action consistent with it.

    ``scaled_tanh`` is ``scale * tanh(theta / scale)`` (Lipschitz constant 1),
    ``affine`` is ``a * theta + b`` (Lipschitz constant ``|a|``).
    """

    kind: ActionKind = "scaled_tanh"
    scale: float = 10.0
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("scaled_tanh", "identity", "affine"):
            raise ValueError(f"unknown action map kind {self.kind!r}")
        if self.kind == "scaled_tanh" and not self.scale > 0:
            raise ValueError(f"tanh scale must be positive, got {self.scale}")

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "scaled_tanh":
            return self.scale * np.tanh(theta / self.scale)
        if self.kind == "identity":
            return theta.copy()
        return self.a * theta + self.b

    @property
    def lipschitz_bound(self) -> float:
        if self.kind == "affine":
            return abs(self.a)
        return 1.0

    def to_dict(self) -> dict:
        if self.kind == "scaled_tanh":
            return {"kind": self.kind, "scale": self.scale}
        if self.kind == "affine":
            return {"kind": self.kind, "a": self.a, "b": self.b}
        return {"kind": self.kind}


def _readonly(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AgentParams:
    """Per-agent self-confidence ``c``, manipulability ``g`` and initial opinion."""

    c: np.ndarray
    g: np.ndarray
    theta0: np.ndarray
    phi: ActionMap = field(default_factory=ActionMap)

    def __post_init__(self) -> None:
        c, g, t0 = _readonly(self.c), _readonly(self.g), _readonly(self.theta0)
        if not (c.ndim == g.ndim == t0.ndim == 1) or not (c.size == g.size == t0.size):
            raise ValueError(
                f"c, g, theta0 must be vectors of equal length, got {c.shape}, {g.shape}, {t0.shape}"
            )
        if np.any(~(c > 0)):
            raise ValueError("self-confidence values must be > 0")
        if np.any(~(g >= 0)):
            raise ValueError("manipulability values must be >= 0")
        if not np.all(np.isfinite(t0)):
            raise ValueError("initial opinions must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "theta0", t0)

    @property
    def n(self) -> int:
        return int(self.c.size)

    def with_g(self, g) -> AgentParams:
        return AgentParams(self.c, g, self.theta0, self.phi)


def manipulation_gain(g, d) -> np.ndarray:
    """Diagonal of ``G_u``: ``g_i / (g_i + (d_i + 1)^2)``."""
    g = np.asarray(g, dtype=float)
    d = np.asarray(d, dtype=float)
    return g / (g + (d + 1.0) ** 2)


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    a_theta: np.ndarray
    g_theta: np.ndarray
    g_u: np.ndarray
    a_u: np.ndarray
    adjacency: np.ndarray
    degrees: np.ndarray


def build_system_matrices(g: Graph, p: AgentParams) -> SystemMatrices:
    if g.n != p.n:
        raise ValueError(f"graph has {g.n} nodes but parameters describe {p.n} agents")
    adj = g.adjacency.astype(float)
    d = degrees(g).astype(float)
    a_theta = (adj + np.diag(p.c)) / (d + p.c)[:, None]
    g_u = manipulation_gain(p.g, d)
    g_theta = 1.0 + d * g_u
    a_u = g_u[:, None] * adj
    return SystemMatrices(
        a_theta=_readonly(a_theta),
        g_theta=_readonly(g_theta),
        g_u=_readonly(g_u),
        a_u=_readonly(a_u),
        adjacency=_readonly(adj),
        degrees=_readonly(d),
    )


def opinion_step(theta, sm: SystemMatrices) -> np.ndarray:
    return sm.a_theta @ np.asarray(theta, dtype=float)


def action_step(u_prev, theta_next, sm: SystemMatrices, phi: ActionMap) -> np.ndarray:
    """Matrix form of the best response: ``G_theta Phi(theta') - A_u u``."""
    return sm.g_theta * phi(theta_next) - sm.a_u @ np.asarray(u_prev, dtype=float)


def action_step_scalar(i: int, u_prev, theta_next_i: float, sm: SystemMatrices, phi: ActionMap) -> float:
    """Best response of agent ``i`` written out per agent (cross-check of :func:`action_step`)."""
    d_i = sm.degrees[i]
    gain = sm.g_u[i]
    neigh = np.flatnonzero(sm.adjacency[i])
    target = float(phi(theta_next_i))
    return (1.0 + d_i * gain) * target - gain * float(np.sum(np.asarray(u_prev)[neigh]))


def agent_cost(u_i: float, theta_i: float, neighbor_actions, g_i: float, d_i: int, phi: ActionMap) -> float:
    """Self-consistency plus weighted manipulation cost of a single action.

    The perceived social outcome is the mean of the neighbours' actions and
    the agent's own.
    """
    neighbor_actions = np.asarray(neighbor_actions, dtype=float)
    if neighbor_actions.size != d_i:
        raise ValueError(f"expected {d_i} neighbour actions, got {neighbor_actions.size}")
    target = float(phi(theta_i))
    local_mean = (float(neighbor_actions.sum()) + u_i) / (d_i + 1)
    return (u_i - target) ** 2 + g_i * (local_mean - target) ** 2


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Opinion and action history; row ``k`` holds step ``k``."""

    theta: np.ndarray
    u: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None

    @property
    def steps(self) -> int:
        return self.theta.shape[0] - 1

    def action_increments(self) -> np.ndarray:
        """``||u(k+1) - u(k)||_2`` for every recorded step."""
        return np.linalg.norm(np.diff(self.u, axis=0), axis=1)

    def opinion_increments(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.theta, axis=0), axis=1)


def simulate(
    g: Graph,
    p: AgentParams,
    steps: int,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> Trajectory:
    """Iterate the coupled dynamics from ``(theta0, Phi(theta0))``.

    Stops early, flagging divergence, once some ``|u_i|`` exceeds the threshold
    or a value stops being finite; the offending step is kept in the history.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    if not divergence_threshold > 0:
        raise ValueError(f"divergence threshold must be positive, got {divergence_threshold}")
    sm = build_system_matrices(g, p)
    theta = np.empty((steps + 1, p.n))
    u = np.empty((steps + 1, p.n))
    theta[0] = p.theta0
    u[0] = p.phi(p.theta0)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            theta[k + 1] = opinion_step(theta[k], sm)
            u[k + 1] = action_step(u[k], theta[k + 1], sm, p.phi)
            row = u[k + 1]
            if not np.all(np.isfinite(row)) or np.max(np.abs(row)) > divergence_threshold:
                return Trajectory(theta[: k + 2].copy(), u[: k + 2].copy(), True, k + 1)
    return Trajectory(theta, u)


@dataclass(frozen=True)
class ComponentConsensus:
    nodes: tuple[int, ...]
    value: float
    spread: float
    reached: bool


def consensus_check(traj: Trajectory, g: Graph, tol: float = 1e-6) -> list[ComponentConsensus]:
    """Spread of the final opinions inside each connected component."""
    final = traj.theta[-1]
    report = []
    for comp in connected_components(g):
        vals = final[comp]
        spread = float(vals.max() - vals.min())
        report.append(ComponentConsensus(tuple(comp), float(vals.mean()), spread, spread <= tol))
    return report


def sample_agents(
    n: int,
    rng: np.random.Generator,
    c_interval: Sequence[float] = (10.0, 100.0),
    g_interval: Sequence[float] = (0.0, 15.0),
    theta_interval: Sequence[float] = (0.0, 10.0),
    phi: ActionMap | None = None,
    g_overrides: dict[int, float] | None = None,
) -> AgentParams:
    """Uniform draws on the given intervals, in the order c, g, theta0."""
    c = rng.uniform(c_interval[0], c_interval[1], n)
    g = rng.uniform(g_interval[0], g_interval[1], n)
    theta0 = rng.uniform(theta_interval[0], theta_interval[1], n)
    for i, val in (g_overrides or {}).items():
        g[int(i)] = val
    return AgentParams(c, g, theta0, phi or ActionMap())
