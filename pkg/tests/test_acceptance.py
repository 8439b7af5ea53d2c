"""Acceptance criteria, each at its stated tolerance.

Every test reports one PASS/FAIL line (collected in the terminal summary).
The scenario configs live in ``configs/`` at the repository root; the CLI
runs write into a per-session temporary directory and are re-run for the
determinism criterion.
"""

import json
import threading
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from opinion_topology import stability
from opinion_topology.cli import main
from opinion_topology.designer import DesignProblem, exhaustive_search, run_ga
from opinion_topology.dynamics import AgentParams, simulate
from opinion_topology.io import dumps
from opinion_topology.netgraph import Graph, gen_ring_lattice, read_edge_list
from opinion_topology.stability import feasibility_oracle
from opinion_topology.verify import SMALL_GA, typical_instance, random_instance, small_infeasible_instance

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
REDESIGN_SEEDS = range(5)
DESIGN_SCENARIOS = ["ring", "ring_min_edges", "star", "star_min_edges"]


def eig_radius(g: Graph, p: AgentParams) -> float:
    """rho(G_u A) from a general eigensolver, independent of the library's similarity route."""
    d = g.degrees().astype(float)
    gu = p.g / (p.g + (d + 1) ** 2)
    return float(np.max(np.abs(np.linalg.eigvals(gu[:, None] * g.adjacency))))


# -- certificate audit ------------------------------------------------------------------


class CertificateAudit:
    def __init__(self):
        self.lock = threading.Lock()
        self.count = 0
        self.violations: list[str] = []

    def __call__(self, a_u, p_mat, q):
        n = p_mat.shape[0]
        lam, vec = np.linalg.eigh(p_mat)
        residual = np.linalg.norm(a_u.T @ p_mat @ a_u - p_mat + q * np.eye(n), "fro")
        problems = []
        if not lam.min() > 0:
            problems.append(f"min eig {lam.min():.3g}")
        if not residual <= 1e-8:
            problems.append(f"residual {residual:.3g}")
        if lam.min() > 0:
            half = (vec * np.sqrt(lam)) @ vec.T
            inv_half = (vec / np.sqrt(lam)) @ vec.T
            p_norm = np.linalg.norm(half @ a_u @ inv_half, 2)
            if not p_norm < 1:
                problems.append(f"P-norm {p_norm:.6f}")
        with self.lock:
            self.count += 1
            if problems:
                self.violations.append(f"n={n}: " + ", ".join(problems))


AUDIT = CertificateAudit()


@pytest.fixture(scope="module", autouse=True)
def certificate_audit():
    stability.certificate_hooks.append(AUDIT)
    yield AUDIT
    stability.certificate_hooks.remove(AUDIT)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def cli(command, config, out, *extra):
    return main([command, "--config", str(CONFIGS / config), "--out", str(out), "--quiet", *extra])


def load(path):
    return json.loads(Path(path).read_text())


# -- 1 ---------------------------------------------------------------------------------------


def test_criterion_1_schur_equivalence(acceptance_report):
    rng = np.random.default_rng(20240101)
    start = time.perf_counter()
    disagreements, banded, checked, stable = [], 0, 0, 0
    for k in range(200):
        g, p = random_instance(rng)
        rho = eig_radius(g, p)
        if abs(rho - 1) < 1e-4:
            banded += 1
            continue
        checked += 1
        stable += rho < 1
        if feasibility_oracle(g.to_bits(), p).feasible != (rho < 1):
            disagreements.append(k)
    elapsed = time.perf_counter() - start
    ok = not disagreements and elapsed < 10
    acceptance_report(
        "1",
        ok,
        f"Schur-equivalence oracle: {len(disagreements)} disagreements over {checked} instances "
        f"({stable} stable, {checked - stable} unstable, {banded} in band), {elapsed:.1f} s (limit 10 s)",
    )
    assert not disagreements
    assert elapsed < 10


# -- 2 -----------------------------------------------------------------------------------------


def test_criterion_2_sufficient_condition(acceptance_report):
    rng = np.random.default_rng(20240102)
    start = time.perf_counter()
    worst, counter = 0.0, []
    for k in range(1000):
        g, p = random_instance(rng, n_max=15, g_max=20.0)
        bound = g.degrees() + 2.0
        # every fourth instance sits exactly on the boundary g_i = d_i + 2
        g_vals = bound if k % 4 == 0 else rng.uniform(0, 1, g.n) * bound
        p = p.with_g(g_vals)
        assert np.all(p.g <= g.degrees() + 2)
        rho = eig_radius(g, p)
        worst = max(worst, rho)
        if not rho < 1:
            counter.append(k)
    elapsed = time.perf_counter() - start
    ok = not counter and elapsed < 30
    acceptance_report(
        "2",
        ok,
        f"sufficient condition g_i <= d_i+2: {len(counter)} counterexamples in 1000 instances, "
        f"max rho {worst:.6f}, {elapsed:.1f} s (limit 30 s)",
    )
    assert not counter
    assert elapsed < 30


# -- 3 -------------------------------------------------------------------------------------------


def cost(u_i, phi_i, neighbour_sum, g_i, d_i):
    local = (neighbour_sum + u_i) / (d_i + 1)
    return (u_i - phi_i) ** 2 + g_i * (local - phi_i) ** 2


def test_criterion_3_best_response_stationarity(acceptance_report):
    rng = np.random.default_rng(20240103)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        g, p = typical_instance(rng)
        traj = simulate(g, p, 100)
        assert traj.steps == 100
        adj = g.adjacency.astype(float)
        d = g.degrees()
        for k in range(100):
            phi = p.phi(traj.theta[k + 1])
            sums = adj @ traj.u[k]
            u = traj.u[k + 1]
            h = 1e-4 * np.maximum(1.0, np.abs(u))
            fd = (cost(u + h, phi, sums, p.g, d) - cost(u - h, phi, sums, p.g, d)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 60
    acceptance_report(
        "3",
        ok,
        f"best-response stationarity: max |dJ_i/du_i| = {worst:.2e} over 50 runs x 100 steps "
        f"(tol 1e-6), {elapsed:.1f} s (limit 60 s)",
    )
    assert worst <= 1e-6
    assert elapsed < 60


# -- 4 ---------------------------------------------------------------------------------------------


def test_criterion_4_table1(workdir, acceptance_report):
    out = workdir / "run1" / "table1"
    assert cli("table1", "table1.json", out) == 0
    table = load(out / "table1.json")
    edges = {r["structure"]: r["edges"] for r in table["rows"]}
    edges_ok = edges == {"L*-lattice": 140, "8-lattice": 80, "6-lattice": 60, "small-world": 60}

    # L*-lattice guarantee over 100 agent draws with g in [0, 15]
    lstar_rhos = []
    draws = set()
    for seed in range(100):
        sub = workdir / "lstar" / str(seed)
        assert cli("table1", "table1_draws.json", sub, "--seed-override", str(seed)) == 0
        draw = load(sub / "table1.json")
        draws.add(tuple(draw["agents"]["g"]))
        row = draw["rows"][0]
        assert row["structure"] == "L*-lattice" and row["edges"] == 140
        lstar_rhos.append(row["rho"])
    lstar_ok = max(lstar_rhos) < 1 and len(draws) == 100

    # existence: the chosen draw's 6-lattice is unstable and some rewiring is stable
    six = next(r for r in table["rows"] if r["structure"] == "6-lattice")
    agents = table["agents"]
    p = AgentParams(agents["c"], agents["g"], agents["theta0"])
    independent = eig_radius(gen_ring_lattice(20, 6), p)
    rewiring = table["rewiring"]
    exist_ok = six["rho"] > 1 and independent > 1 and rewiring["trials"] == 50 and rewiring["stable_count"] >= 1

    ok = edges_ok and lstar_ok and exist_ok
    acceptance_report(
        "4",
        ok,
        f"table1 edges {edges}; L*-lattice max rho over 100 draws {max(lstar_rhos):.4f}; "
        f"6-lattice rho {six['rho']:.4f} (agent seed {table['agent_seed']}), "
        f"{rewiring['stable_count']}/50 small-world rewirings stable",
    )
    assert edges_ok and lstar_ok and exist_ok


# -- 5 --------------------------------------------------------------------------------------------


def criterion5_instances():
    triangle = Graph.from_edges(4, [(0, 1), (0, 2), (1, 2)])
    yield triangle, AgentParams([10.0] * 4, [12.0] * 4, [1.0, 4.0, 7.0, 9.0])
    for k in range(1, 20):
        yield small_infeasible_instance(k)


def criterion5_run(out_dir: Path) -> tuple[int, int, list]:
    matches = beats = 0
    rows = []
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, (g, p) in enumerate(criterion5_instances()):
        assert g.n <= 6
        prob = DesignProblem(g.to_bits(), p)
        assert not feasibility_oracle(prob.x0, p).feasible
        exact = exhaustive_search(prob)
        ga = run_ga(prob, replace(SMALL_GA, seed=k))
        matches += ga.best.fitness == exact.fitness
        beats += ga.best.fitness < exact.fitness
        rows.append((k, g.n, exact.fitness, ga.best.fitness))
        (out_dir / f"instance_{k}.json").write_text(dumps(ga.to_dict()))
    return matches, beats, rows


def test_criterion_5_ga_optimality(workdir, acceptance_report):
    start = time.perf_counter()
    matches, beats, rows = criterion5_run(workdir / "run1" / "ga_small")
    elapsed = time.perf_counter() - start
    ok = matches >= 16 and beats == 0 and elapsed < 120
    acceptance_report(
        "5",
        ok,
        f"GA vs exhaustive on 20 infeasible instances (n <= 6): {matches}/20 match, {beats} better than "
        f"exhaustive, {elapsed:.1f} s (limit 120 s)",
    )
    assert matches >= 16 and beats == 0
    assert elapsed < 120


# -- 6 ---------------------------------------------------------------------------------------------


def redesign_runs(root: Path):
    for s in REDESIGN_SEEDS:
        out = root / f"redesign_s{s}"
        assert cli("design", f"redesign_er_s{s}.json", out) == 0
        yield s, out


@pytest.fixture(scope="module")
def redesign(workdir):
    start = time.perf_counter()
    outs = dict(redesign_runs(workdir / "run1"))
    return outs, time.perf_counter() - start


def test_criterion_6_redesign(redesign, acceptance_report):
    outs, elapsed = redesign
    details, ok = [], elapsed < 600
    for s, out in outs.items():
        design = load(out / "design.json")
        before, after = load(out / "report_before.json"), load(out / "report_after.json")
        designed = read_edge_list(out / "designed.edges")
        assert design["n"] == 20 and design["generations"] == 200
        agents = load(out / "agents.json")
        p = AgentParams(agents["c"], agents["g"], agents["theta0"])
        assert max(p.g) <= 10 and min(p.g) >= 0
        feasible = after["feasible"] and feasibility_oracle(designed.to_bits(), p).feasible
        ok &= (not before["feasible"]) and before["rho"] > 1 and feasible and design["fitness"] <= 8
        details.append(f"s{s}: rho {before['rho']:.4f}->{after['rho']:.4f} fitness {design['fitness']:g}")
    acceptance_report(
        "6a",
        ok,
        "ER(0.2) redesign, pop 60 x 200 generations: " + "; ".join(details) + f"; {elapsed:.0f} s (limit 600 s)",
    )
    assert ok


def test_criterion_6_convergence(redesign, acceptance_report):
    outs, _ = redesign
    details, ok = [], True
    for s, out in outs.items():
        u = np.loadtxt(out / "trajectory_after.csv", delimiter=",", skiprows=1)[:, 21:]
        inc = np.linalg.norm(np.diff(u, axis=0), axis=1)
        assert inc.size >= 301
        settled = np.flatnonzero(inc[:301] < 1e-6)
        ok &= settled.size > 0
        first = int(settled[0]) if settled.size else None
        details.append(f"s{s}: |du(300)| = {inc[300]:.2e}" + (f", below 1e-6 at k={first}" if first is not None else ""))
    acceptance_report(
        "6b",
        ok,
        "redesigned graphs ||u(k+1)-u(k)|| < 1e-6 by k = 300: " + "; ".join(details),
    )
    assert ok, "action increments on the redesigned graphs are still above 1e-6 at k = 300"


# -- 7 ----------------------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def scenario_designs(workdir):
    outs = {}
    for name in DESIGN_SCENARIOS:
        out = workdir / "run1" / name
        assert cli("design", f"{name}.json", out) == 0
        outs[name] = out
    return outs


def test_criterion_7_ring_and_star(scenario_designs, acceptance_report):
    ok, details = True, []
    for shape in ("ring", "star"):
        free = load(scenario_designs[shape] / "design.json")
        free_after = load(scenario_designs[shape] / "report_after.json")
        ok &= free["edges_after"] < free["edges_before"] and free_after["feasible"]
        bounded_dir = scenario_designs[f"{shape}_min_edges"]
        bounded = load(bounded_dir / "design.json")
        agents = load(bounded_dir / "agents.json")
        p = AgentParams(agents["c"], agents["g"], agents["theta0"])
        designed = read_edge_list(bounded_dir / "designed.edges")
        passes = feasibility_oracle(designed.to_bits(), p).feasible
        ok &= designed.edge_count >= 19 and passes and not load(bounded_dir / "report_before.json")["feasible"]
        details.append(
            f"{shape}: unconstrained {free['edges_before']}->{free['edges_after']} edges, "
            f"min_edges=19 {bounded['edges_before']}->{designed.edge_count} edges (oracle {passes})"
        )
    acceptance_report("7", ok, "; ".join(details))
    assert ok


# -- 8 -----------------------------------------------------------------------------------------------


def test_criterion_8_certificate_validity(certificate_audit, acceptance_report):
    # also certify a fresh batch so the audit never passes vacuously
    rng = np.random.default_rng(20240108)
    for _ in range(50):
        g, p = random_instance(rng)
        stability.analyze(g, p)
    audit = certificate_audit
    ok = audit.count > 0 and not audit.violations
    acceptance_report(
        "8",
        ok,
        f"certificate audit: {audit.count} certificates emitted during the acceptance runs, "
        f"{len(audit.violations)} violations (PD, residual <= 1e-8, P-norm < 1)",
    )
    assert audit.count > 0
    assert not audit.violations, audit.violations[:5]


# -- 9 --------------------------------------------------------------------------------------------------


def test_criterion_9_determinism(workdir, redesign, scenario_designs, acceptance_report):
    run1, run2 = workdir / "run1", workdir / "run2"
    assert cli("table1", "table1.json", run2 / "table1") == 0
    criterion5_run(run2 / "ga_small")
    dict(redesign_runs(run2))
    for name in DESIGN_SCENARIOS:
        assert cli("design", f"{name}.json", run2 / name) == 0
    files = sorted(p.relative_to(run1) for p in run1.rglob("*") if p.is_file())
    mismatched = [str(f) for f in files if (run1 / f).read_bytes() != (run2 / f).read_bytes()]
    extra = sorted(str(p.relative_to(run2)) for p in run2.rglob("*") if p.is_file() and not (run1 / p.relative_to(run2)).exists())
    ok = not mismatched and not extra and len(files) > 0
    acceptance_report(
        "9",
        ok,
        f"determinism: {len(files)} output files from criteria 4-7 re-generated, {len(mismatched)} differ",
    )
    assert ok, mismatched[:5] + extra[:5]


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-rA"]))
