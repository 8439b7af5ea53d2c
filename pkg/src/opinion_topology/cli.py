"""Command-line experiment runner.

Subcommands write into the output directory (``--out``, else the config's
``out`` field) and return exit code 0 on success, 2 on a configuration
error, 3 when the GA cannot build an initial population and 4 when a
property suite fails.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .config import ConfigError, ExperimentConfig, load_config
from .designer import DesignProblem, InitializationError, run_ga
from .dynamics import AgentParams, consensus_check, simulate
from .io import agents_dict, format_float, write_json, write_trajectory_csv
from .netgraph import Graph, gen_ring_lattice, gen_small_world, read_edge_list, write_edge_list
from .scenarios import build_graph, draw_agents, scenario
from .stability import action_spectral_radius, analyze, heuristic_lattice_degree

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INIT = 3
EXIT_PROPERTY = 4


@dataclass
class Context:
    cfg: ExperimentConfig
    out: Path
    graph_path: Path | None
    quiet: bool

    def echo(self, msg: str) -> None:
        if not self.quiet:
            print(msg)


def degree_summary(g: Graph) -> str:
    d = g.degrees()
    if g.n == 0:
        return "no nodes"
    return f"degree min {int(d.min())}, mean {d.mean():.3f}, max {int(d.max())}"


def _load_graph(ctx: Context) -> Graph | None:
    if ctx.graph_path is None:
        return None
    try:
        return read_edge_list(ctx.graph_path)
    except OSError as exc:
        raise ConfigError("--graph", f"cannot read graph: {exc.strerror}") from exc
    except ValueError as exc:
        raise ConfigError("--graph", str(exc)) from exc


def _scenario(ctx: Context) -> tuple[Graph, AgentParams]:
    try:
        return scenario(ctx.cfg, _load_graph(ctx))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("<scenario>", str(exc)) from exc


def _simulation_summary(g: Graph, p: AgentParams, ctx: Context) -> tuple:
    traj = simulate(g, p, ctx.cfg.sim.steps, ctx.cfg.sim.divergence_threshold)
    comps = consensus_check(traj, g)
    summary = {
        "steps": traj.steps,
        "diverged": traj.diverged,
        "diverged_at": traj.diverged_at,
        "consensus": [
            {"nodes": c.nodes, "value": c.value, "spread": c.spread, "reached": c.reached} for c in comps
        ],
    }
    return traj, summary


def cmd_generate(ctx: Context) -> int:
    g = build_graph(ctx.cfg.n, ctx.cfg.graph)
    write_edge_list(g, ctx.out / "graph.edges")
    ctx.echo(f"{g.edge_count} edges; {degree_summary(g)}")
    return EXIT_OK


def cmd_simulate(ctx: Context) -> int:
    g, p = _scenario(ctx)
    report = analyze(g, p, ctx.cfg.oracle_params())
    traj, summary = _simulation_summary(g, p, ctx)
    write_trajectory_csv(traj, ctx.out / "trajectory.csv")
    write_json({**report.to_dict(), **summary}, ctx.out / "stability.json")
    write_json(agents_dict(p), ctx.out / "agents.json")
    ctx.echo(
        f"rho(A_u) = {format_float(report.rho)}; feasible = {report.feasible}; "
        f"diverged = {traj.diverged}"
    )
    return EXIT_OK


def cmd_design(ctx: Context) -> int:
    cfg = ctx.cfg
    g, p = _scenario(ctx)
    weights = None if cfg.design.weights is None else np.array(cfg.design.weights)
    prob = DesignProblem(
        g.to_bits(),
        p,
        oracle=cfg.oracle_params(),
        weights=weights,
        min_edges=cfg.design.min_edges,
        frozen_edges=cfg.frozen_edge_indices(),
    )
    progress = None
    if not ctx.quiet:
        every = max(1, cfg.ga.generations // 10)

        def progress(stats):
            if stats.generation % every == 0:
                print(f"  generation {stats.generation}: best fitness {format_float(stats.best_fitness)}")

    result = run_ga(prob, cfg.ga, workers=cfg.workers, progress=progress)
    designed = Graph.from_bits(result.best.bits)
    before = analyze(g, p, cfg.oracle_params())
    after = analyze(designed, p, cfg.oracle_params())
    traj_before, sum_before = _simulation_summary(g, p, ctx)
    traj_after, sum_after = _simulation_summary(designed, p, ctx)
    write_json(result.to_dict(), ctx.out / "design.json")
    write_edge_list(designed, ctx.out / "designed.edges")
    write_json({**before.to_dict(), **sum_before}, ctx.out / "report_before.json")
    write_json({**after.to_dict(), **sum_after}, ctx.out / "report_after.json")
    write_trajectory_csv(traj_before, ctx.out / "trajectory_before.csv")
    write_trajectory_csv(traj_after, ctx.out / "trajectory_after.csv")
    write_json(agents_dict(p), ctx.out / "agents.json")
    ctx.echo(
        f"fitness {format_float(result.best.fitness)}; edges {g.edge_count} -> {designed.edge_count}; "
        f"rho {format_float(before.rho)} -> {format_float(after.rho)}"
    )
    return EXIT_OK


def _table1_draw(cfg: ExperimentConfig) -> tuple[int, AgentParams]:
    """Agent seed and draw for the table; optionally the first whose base lattice is unstable."""
    t = cfg.table1
    if not t.search_unstable_draw:
        return cfg.agents.seed, draw_agents(cfg)
    base = gen_ring_lattice(cfg.n, t.small_world_degree)
    for seed in range(cfg.agents.seed, cfg.agents.seed + t.max_draws):
        p = draw_agents(cfg, seed)
        if action_spectral_radius(base, p) > 1.0:
            return seed, p
    raise ConfigError(
        "table1.max_draws", f"no unstable {t.small_world_degree}-lattice draw within {t.max_draws} seeds"
    )


def cmd_table1(ctx: Context) -> int:
    cfg, t = ctx.cfg, ctx.cfg.table1
    seed, p = _table1_draw(cfg)
    g_bound = max([cfg.agents.g_interval[1], *cfg.agents.g_overrides.values()])
    star_degree = heuristic_lattice_degree(g_bound)
    try:
        structures = [("L*-lattice", star_degree, gen_ring_lattice(cfg.n, star_degree))]
        structures += [(f"{d}-lattice", d, gen_ring_lattice(cfg.n, d)) for d in t.lattice_degrees]
        structures.append(
            (
                "small-world",
                t.small_world_degree,
                gen_small_world(cfg.n, t.small_world_degree, t.small_world_beta, seed=t.small_world_seed),
            )
        )
    except ValueError as exc:
        raise ConfigError("table1", str(exc)) from exc
    rows = []
    for name, degree, g in structures:
        rho = action_spectral_radius(g, p)
        rows.append({"structure": name, "degree": degree, "edges": g.edge_count, "rho": rho, "stable": rho < 1.0})
    sweep_rhos = [
        action_spectral_radius(
            gen_small_world(cfg.n, t.small_world_degree, t.small_world_beta, seed=t.small_world_seed + k), p
        )
        for k in range(t.rewiring_trials)
    ]
    sweep = {
        "trials": t.rewiring_trials,
        "seeds": [t.small_world_seed + k for k in range(t.rewiring_trials)],
        "rho": sweep_rhos,
        "stable_count": sum(r < 1.0 for r in sweep_rhos),
    }
    csv = ["structure,rho,edges"] + [f"{r['structure']},{format_float(r['rho'])},{r['edges']}" for r in rows]
    (ctx.out / "table1.csv").write_text("\n".join(csv) + "\n")
    write_json(
        {"agent_seed": seed, "g_bound": g_bound, "rows": rows, "rewiring": sweep, "agents": agents_dict(p)},
        ctx.out / "table1.json",
    )
    for r in rows:
        ctx.echo(f"{r['structure']:>12}  rho {r['rho']:.4f}  |E| {r['edges']}")
    ctx.echo(f"small-world rewirings stable: {sweep['stable_count']}/{t.rewiring_trials}")
    return EXIT_OK


def cmd_verify(ctx: Context) -> int:
    v = ctx.cfg.verify
    suites = verify_mod.run_all(
        seed=v.seed,
        schur_instances=v.schur_instances,
        sufficiency_instances=v.sufficiency_instances,
        stationarity_runs=v.stationarity_runs,
        proposition_instances=v.proposition_instances,
        ga_instances=v.ga_instances,
        inject_fault=v.inject_fault,
    )
    ok = all(s.ok for s in suites)
    write_json({"ok": ok, "suites": [s.to_dict() for s in suites]}, ctx.out / "verify.json")
    for s in suites:
        ctx.echo(f"{'PASS' if s.ok else 'FAIL'} {s.name}: {s.passed} passed, {s.failed} failed, {s.skipped} skipped")
    return EXIT_OK if ok else EXIT_PROPERTY


COMMANDS = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "design": cmd_design,
    "table1": cmd_table1,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opinion-topology", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON experiment config (defaults when omitted)")
    parser.add_argument("--graph", type=Path, help="edge-list file overriding the config's graph")
    parser.add_argument("--out", type=Path, help="output directory (overrides the config)")
    parser.add_argument("--seed-override", type=int, help="replace every seed in the config")
    parser.add_argument("--quiet", action="store_true", help="suppress console output")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed_override is not None:
            cfg = cfg.with_seed(args.seed_override)
        out = args.out if args.out is not None else Path(cfg.out)
        if args.out is not None:
            cfg = replace(cfg, out=str(out))
        out.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, out, args.graph, args.quiet)
        return COMMANDS[args.command](ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InitializationError as exc:
        print(f"initialization failed: {exc}", file=sys.stderr)
        return EXIT_INIT


if __name__ == "__main__":
    sys.exit(main())
