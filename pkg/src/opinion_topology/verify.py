"""Cross-module property suites run by ``opinion-topology verify``."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .designer import DesignProblem, GaConfig, exhaustive_search, run_ga
from .dynamics import AgentParams, agent_cost, build_system_matrices, sample_agents, simulate
from .netgraph import Graph, gen_erdos_renyi, gen_ring_lattice, gen_small_world
from .numerics import p_norm_of_matrix, pd_check
from .scenarios import make_unstable
from .stability import (
    DesignOracleParams,
    action_spectral_radius,
    analyze,
    certificate_transform_Z,
    feasibility_oracle,
    lyapunov_constraint_matrix,
    sufficient_condition,
    z_constraint_matrix,
)

SCHUR_BAND = 1e-4
STATIONARITY_TOL = 1e-6
# small instances are far from x0-feasible, so initial perturbations flip half the pairs
SMALL_GA = GaConfig(pop_size=30, generations=60, init_flip_rate=0.5)


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def record(self, ok: bool, note: str | None = None) -> None:
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if note and len(self.notes) < 10:
                self.notes.append(note)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "failed": self.failed,
            "skipped": self.skipped,
            "ok": self.ok,
            "notes": self.notes,
        }


def random_instance(rng: np.random.Generator, n_max: int = 12, g_max: float = 20.0) -> tuple[Graph, AgentParams]:
    n = int(rng.integers(2, n_max + 1))
    p = float(rng.choice([0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]))
    g = gen_erdos_renyi(n, p, seed=int(rng.integers(2**31)))
    params = sample_agents(n, rng, g_interval=(0.0, g_max))
    return g, params


def small_infeasible_instance(seed: int, g_max: float = 60.0) -> tuple[Graph, AgentParams]:
    """Graph on 4 to 6 nodes with manipulability raised until it is unstable."""
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(4, 7))
        g = gen_erdos_renyi(n, float(rng.uniform(0.4, 0.9)), seed=int(rng.integers(2**31)))
        params = sample_agents(n, rng, c_interval=(1.0, 10.0), g_interval=(0.0, 20.0))
        if action_spectral_radius(g, params.with_g(np.full(n, g_max))) > 1.0:
            return g, make_unstable(g, params, g_max)


def typical_instance(rng: np.random.Generator, n: int = 20) -> tuple[Graph, AgentParams]:
    """Random, lattice or small-world graph with c in [10,100], g in [0,15], theta0 in [0,10]."""
    kind = int(rng.integers(3))
    seed = int(rng.integers(2**31))
    if kind == 0:
        g = gen_erdos_renyi(n, float(rng.choice([0.2, 0.3, 0.4])), seed=seed)
    elif kind == 1:
        g = gen_ring_lattice(n, int(rng.choice([4, 6, 8])))
    else:
        g = gen_small_world(n, 6, 0.3, seed=seed)
    return g, sample_agents(n, rng)


def max_stationarity_residual(g: Graph, p: AgentParams, steps: int) -> float:
    """Largest |central difference of the agent cost| at every simulated action."""
    traj = simulate(g, p, steps)
    sm = build_system_matrices(g, p)
    neigh = [np.flatnonzero(g.adjacency[i]) for i in range(g.n)]
    worst = 0.0
    for k in range(traj.steps):
        u_prev, theta_next, u_next = traj.u[k], traj.theta[k + 1], traj.u[k + 1]
        for i in range(g.n):
            d_i = int(sm.degrees[i])
            h = 1e-3 * max(1.0, abs(u_next[i]))
            args = (theta_next[i], u_prev[neigh[i]], p.g[i], d_i, p.phi)
            fd = (agent_cost(u_next[i] + h, *args) - agent_cost(u_next[i] - h, *args)) / (2 * h)
            worst = max(worst, abs(fd))
    return worst


def suite_schur(count: int, rng: np.random.Generator, inject_fault: bool = False) -> SuiteResult:
    res = SuiteResult("schur_equivalence")
    oracle = DesignOracleParams()
    for _ in range(count):
        g, p = random_instance(rng)
        rho = action_spectral_radius(g, p)
        if abs(rho - 1.0) < SCHUR_BAND:
            res.skipped += 1
            continue
        verdict = feasibility_oracle(g.to_bits(), p, oracle).feasible
        if inject_fault:
            verdict = not verdict
        res.record(verdict == (rho < 1.0), f"n={g.n} rho={rho:.6f} oracle={verdict}")
    return res


def suite_certificates(count: int, rng: np.random.Generator) -> SuiteResult:
    res = SuiteResult("certificate_validity")
    for _ in range(count):
        g, p = random_instance(rng)
        rep = analyze(g, p)
        if rep.certificate is None:
            res.skipped += 1
            continue
        a_u = build_system_matrices(g, p).a_u
        lhs = lyapunov_constraint_matrix(a_u, rep.certificate, rep.margin_q)
        ok = (
            pd_check(rep.certificate).is_pd
            and rep.certificate_residual <= 1e-8 * rep.margin_q * np.sqrt(g.n)
            and p_norm_of_matrix(a_u, rep.certificate) < 1.0
            and np.linalg.eigvalsh(lhs)[-1] <= 1e-8
        )
        res.record(bool(ok), f"n={g.n} rho={rep.rho:.6f}")
    return res


def suite_sufficiency(count: int, rng: np.random.Generator) -> SuiteResult:
    res = SuiteResult("sufficient_condition")
    for _ in range(count):
        g, p = random_instance(rng)
        bound = g.degrees() + 2.0
        p = p.with_g(rng.uniform(0.0, 1.0, g.n) * bound)
        assert sufficient_condition(g, p).all_ok
        rho = action_spectral_radius(g, p)
        res.record(rho < 1.0, f"n={g.n} rho={rho:.6f}")
    return res


def suite_stationarity(runs: int, rng: np.random.Generator, steps: int = 100) -> SuiteResult:
    res = SuiteResult("best_response_stationarity")
    for _ in range(runs):
        g, p = typical_instance(rng)
        worst = max_stationarity_residual(g, p, steps)
        res.record(worst <= STATIONARITY_TOL, f"max |dJ/du| = {worst:.3g}")
    return res


def suite_proposition(count: int, rng: np.random.Generator) -> SuiteResult:
    """``Z = G_u P G_u`` maps feasible certificates to feasible ``Z`` and back."""
    res = SuiteResult("change_of_variables")
    q = 0.01
    for _ in range(count):
        g, p = random_instance(rng)
        p = p.with_g(np.maximum(p.g, 0.1))
        a_u = build_system_matrices(g, p).a_u
        n = g.n
        # random SPD candidate, scaled so both feasible and infeasible cases occur
        m = rng.normal(size=(n, n))
        cand = m @ m.T + n * np.eye(n)
        cand *= float(rng.choice([1e-3, 1e-1, 1.0, 10.0]))
        z = certificate_transform_Z(cand, g, p)
        p_side = not pd_check(-lyapunov_constraint_matrix(a_u, cand, q) + 1e-12 * np.eye(n)).is_pd
        z_side = not pd_check(-z_constraint_matrix(z, g, p, q) + 1e-12 * np.eye(n)).is_pd
        res.record(p_side == z_side and pd_check(z).is_pd, f"n={n}")
    return res


def suite_ga(count: int, seed: int) -> SuiteResult:
    res = SuiteResult("ga_vs_exhaustive")
    for k in range(count):
        g, p = small_infeasible_instance(seed * 1000 + k)
        prob = DesignProblem(g.to_bits(), p)
        exact = exhaustive_search(prob)
        ga = run_ga(prob, replace(SMALL_GA, seed=seed * 1000 + k))
        res.record(exact.fitness is not None and ga.best.fitness >= exact.fitness, f"instance {k}")
    return res


def run_all(
    seed: int = 0,
    schur_instances: int = 100,
    sufficiency_instances: int = 200,
    stationarity_runs: int = 5,
    proposition_instances: int = 50,
    ga_instances: int = 4,
    inject_fault: bool = False,
) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    return [
        suite_schur(schur_instances, rng, inject_fault=inject_fault),
        suite_certificates(schur_instances, rng),
        suite_sufficiency(sufficiency_instances, rng),
        suite_stationarity(stationarity_runs, rng),
        suite_proposition(proposition_instances, rng),
        suite_ga(ga_instances, seed),
    ]
