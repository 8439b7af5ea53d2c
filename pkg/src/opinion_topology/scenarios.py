"""Build graphs and agent populations from an :class:`ExperimentConfig`."""

from __future__ import annotations

import numpy as np

from .config import ExperimentConfig, GraphSpec
from .dynamics import AgentParams, sample_agents
from .netgraph import (
    Graph,
    gen_complete,
    gen_empty,
    gen_erdos_renyi,
    gen_ring_lattice,
    gen_small_world,
    gen_star,
)
from .stability import action_spectral_radius


def build_graph(n: int, spec: GraphSpec) -> Graph:
    if spec.type == "erdos_renyi":
        return gen_erdos_renyi(n, spec.p, seed=spec.seed)
    if spec.type == "ring_lattice":
        return gen_ring_lattice(n, spec.d)
    if spec.type == "star":
        return gen_star(n)
    if spec.type == "small_world":
        return gen_small_world(n, spec.d, spec.beta, seed=spec.seed)
    if spec.type == "empty":
        return gen_empty(n)
    if spec.type == "complete":
        return gen_complete(n)
    raise ValueError(f"unknown graph type {spec.type!r}")


def draw_agents(cfg: ExperimentConfig, seed: int | None = None) -> AgentParams:
    a = cfg.agents
    rng = np.random.default_rng(a.seed if seed is None else seed)
    return sample_agents(
        cfg.n,
        rng,
        c_interval=a.c_interval,
        g_interval=a.g_interval,
        theta_interval=a.theta_interval,
        phi=cfg.phi,
        g_overrides=a.g_overrides,
    )


def make_unstable(g: Graph, p: AgentParams, g_max: float) -> AgentParams:
    """Raise manipulability values to ``g_max`` until ``rho(A_u) > 1``.

    Greedy: each round lifts the agent whose raise increases the spectral
    radius most (lowest index on ties).  Values never leave ``[0, g_max]``.
    Raises ``ValueError`` if even ``g = g_max`` everywhere is stable.
    """
    g_vals = np.array(p.g, dtype=float)
    while action_spectral_radius(g, p.with_g(g_vals)) <= 1.0:
        best_rho, best_i = -1.0, -1
        for i in range(g.n):
            if g_vals[i] >= g_max:
                continue
            trial = g_vals.copy()
            trial[i] = g_max
            rho = action_spectral_radius(g, p.with_g(trial))
            if rho > best_rho:
                best_rho, best_i = rho, i
        if best_i < 0:
            raise ValueError(f"graph stays stable with every g at {g_max}")
        g_vals[best_i] = g_max
    return p.with_g(g_vals)


def scenario(cfg: ExperimentConfig, graph: Graph | None = None) -> tuple[Graph, AgentParams]:
    """Graph (from ``graph`` or the config) and the configured agent draw."""
    g = graph if graph is not None else build_graph(cfg.n, cfg.graph)
    if g.n != cfg.n:
        raise ValueError(f"graph has {g.n} nodes but config says n={cfg.n}")
    p = draw_agents(cfg)
    if cfg.agents.make_unstable:
        p = make_unstable(g, p, cfg.agents.g_interval[1])
    return g, p
