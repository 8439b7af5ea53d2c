"""JSON experiment configuration.

Every random draw in an experiment is tied to an explicit seed in the
config file.  Unknown keys are rejected so that typos surface as errors
instead of silently falling back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .designer import GaConfig
from .dynamics import ActionMap
from .netgraph import edge_count_for, edge_index
from .stability import DesignOracleParams

GRAPH_TYPES = ("erdos_renyi", "ring_lattice", "star", "small_world", "empty", "complete")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class GraphSpec:
    type: str = "erdos_renyi"
    p: float = 0.2
    d: int = 4
    beta: float = 0.3
    seed: int = 0


@dataclass(frozen=True)
class AgentSpec:
    seed: int = 0
    c_interval: tuple[float, float] = (10.0, 100.0)
    g_interval: tuple[float, float] = (0.0, 15.0)
    theta_interval: tuple[float, float] = (0.0, 10.0)
    g_overrides: dict = field(default_factory=dict)
    # raise g to the interval top, agent by agent, until the graph is unstable
    make_unstable: bool = False


@dataclass(frozen=True)
class SimSpec:
    steps: int = 100
    divergence_threshold: float = 1e9


@dataclass(frozen=True)
class DesignSpec:
    q: float = 0.01
    rho_margin: float = 1e-6
    min_edges: int | None = None
    frozen_edges: tuple = ()
    weights: tuple | None = None


@dataclass(frozen=True)
class Table1Spec:
    lattice_degrees: tuple[int, ...] = (8, 6)
    small_world_degree: int = 6
    small_world_beta: float = 0.3
    small_world_seed: int = 0
    rewiring_trials: int = 50
    # scan agent seeds upward from agents.seed until the small-world base lattice is unstable
    search_unstable_draw: bool = False
    max_draws: int = 1000


@dataclass(frozen=True)
class VerifySpec:
    schur_instances: int = 100
    sufficiency_instances: int = 200
    stationarity_runs: int = 5
    proposition_instances: int = 50
    ga_instances: int = 4
    seed: int = 0
    inject_fault: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 20
    graph: GraphSpec = field(default_factory=GraphSpec)
    agents: AgentSpec = field(default_factory=AgentSpec)
    phi: ActionMap = field(default_factory=ActionMap)
    sim: SimSpec = field(default_factory=SimSpec)
    design: DesignSpec = field(default_factory=DesignSpec)
    ga: GaConfig = field(default_factory=GaConfig)
    workers: int = 1
    table1: Table1Spec = field(default_factory=Table1Spec)
    verify: VerifySpec = field(default_factory=VerifySpec)
    out: str = "results"

    def oracle_params(self) -> DesignOracleParams:
        return DesignOracleParams(q=self.design.q, rho_margin=self.design.rho_margin)

    def frozen_edge_indices(self) -> frozenset[int]:
        out = set()
        for item in self.design.frozen_edges:
            if isinstance(item, int):
                out.add(item)
            else:
                i, j = item
                out.add(edge_index(min(i, j), max(i, j), self.n))
        return frozenset(out)

    def with_seed(self, seed: int) -> ExperimentConfig:
        return replace(
            self,
            graph=replace(self.graph, seed=seed),
            agents=replace(self.agents, seed=seed),
            ga=replace(self.ga, seed=seed),
            table1=replace(self.table1, small_world_seed=seed),
            verify=replace(self.verify, seed=seed),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phi"] = self.phi.to_dict()
        return d


def _expect_type(path: str, value: Any, types: tuple, what: str) -> None:
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(path, f"expected {what}, got {value!r}")
    if not isinstance(value, types):
        raise ConfigError(path, f"expected {what}, got {value!r}")


def _interval(path: str, value: Any) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(path, f"expected [lower, upper], got {value!r}")
    lo, hi = value
    _expect_type(path, lo, (int, float), "a number")
    _expect_type(path, hi, (int, float), "a number")
    if lo > hi:
        raise ConfigError(path, f"lower bound {lo} exceeds upper bound {hi}")
    return float(lo), float(hi)


_SCALARS = {int: (int,), float: (int, float), bool: (bool,), str: (str,)}


def _section(cls, path: str, raw: Any, special: dict | None = None):
    """Build dataclass ``cls`` from ``raw`` using the defaults for missing keys."""
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(path, f"expected an object, got {raw!r}")
    special = special or {}
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        sub = f"{path}.{key}" if path else key
        if key not in known:
            raise ConfigError(sub, "unknown field")
        if key in special:
            kwargs[key] = special[key](sub, value)
            continue
        default = getattr(cls(), key)
        if value is None and default is None:
            kwargs[key] = None
            continue
        kind = type(default) if default is not None else int
        if kind in _SCALARS:
            _expect_type(sub, value, _SCALARS[kind], kind.__name__)
            kwargs[key] = kind(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(path or "<root>", str(exc)) from exc


def _optional_int(path: str, value: Any) -> int | None:
    if value is None:
        return None
    _expect_type(path, value, (int,), "an integer or null")
    return int(value)


def _optional_float(path: str, value: Any) -> float | None:
    if value is None:
        return None
    _expect_type(path, value, (int, float), "a number or null")
    return float(value)


def _overrides(path: str, value: Any) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(path, "expected an object mapping agent index to g")
    out = {}
    for k, v in value.items():
        try:
            idx = int(k)
        except ValueError:
            raise ConfigError(f"{path}.{k}", "agent index must be an integer") from None
        _expect_type(f"{path}.{k}", v, (int, float), "a number")
        if v < 0:
            raise ConfigError(f"{path}.{k}", "manipulability must be >= 0")
        out[idx] = float(v)
    return out


def _int_tuple(path: str, value: Any) -> tuple[int, ...]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, "expected a list of integers")
    for i, v in enumerate(value):
        _expect_type(f"{path}[{i}]", v, (int,), "an integer")
    return tuple(int(v) for v in value)


def _frozen_edges(path: str, value: Any) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, "expected a list of edge indices or [i, j] pairs")
    out = []
    for i, item in enumerate(value):
        if isinstance(item, int) and not isinstance(item, bool):
            out.append(item)
        elif isinstance(item, (list, tuple)) and len(item) == 2 and all(isinstance(v, int) for v in item):
            out.append((int(item[0]), int(item[1])))
        else:
            raise ConfigError(f"{path}[{i}]", f"bad edge {item!r}")
    return tuple(out)


def _weights(path: str, value: Any) -> tuple | None:
    if value is None:
        return None
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, "expected a list of nonnegative numbers or null")
    for i, v in enumerate(value):
        _expect_type(f"{path}[{i}]", v, (int, float), "a number")
        if v < 0:
            raise ConfigError(f"{path}[{i}]", "weights must be >= 0")
    return tuple(float(v) for v in value)


def _phi(path: str, raw: Any) -> ActionMap:
    if raw is None:
        return ActionMap()
    if not isinstance(raw, dict):
        raise ConfigError(path, f"expected an object, got {raw!r}")
    for key in raw:
        if key not in ("kind", "scale", "a", "b"):
            raise ConfigError(f"{path}.{key}", "unknown field")
    try:
        return ActionMap(**raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from exc


def parse_config(raw: Any) -> ExperimentConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for key in raw:
        if key not in {f.name for f in fields(ExperimentConfig)}:
            raise ConfigError(key, "unknown field")
    n = raw.get("n", 20)
    _expect_type("n", n, (int,), "an integer")
    if n < 1:
        raise ConfigError("n", "must be >= 1")
    graph = _section(GraphSpec, "graph", raw.get("graph"))
    if graph.type not in GRAPH_TYPES:
        raise ConfigError("graph.type", f"must be one of {', '.join(GRAPH_TYPES)}")
    agents = _section(
        AgentSpec,
        "agents",
        raw.get("agents"),
        {
            "c_interval": _interval,
            "g_interval": _interval,
            "theta_interval": _interval,
            "g_overrides": _overrides,
        },
    )
    if agents.c_interval[0] <= 0:
        raise ConfigError("agents.c_interval", "self-confidence must be > 0")
    if agents.g_interval[0] < 0:
        raise ConfigError("agents.g_interval", "manipulability must be >= 0")
    for idx in agents.g_overrides:
        if not 0 <= idx < n:
            raise ConfigError(f"agents.g_overrides.{idx}", f"agent index out of range for n={n}")
    sim = _section(SimSpec, "sim", raw.get("sim"))
    if sim.steps < 0:
        raise ConfigError("sim.steps", "must be >= 0")
    if sim.divergence_threshold <= 0:
        raise ConfigError("sim.divergence_threshold", "must be > 0")
    design = _section(
        DesignSpec,
        "design",
        raw.get("design"),
        {"min_edges": _optional_int, "frozen_edges": _frozen_edges, "weights": _weights},
    )
    if design.weights is not None and len(design.weights) != edge_count_for(n):
        raise ConfigError("design.weights", f"expected {edge_count_for(n)} weights for n={n}")
    ga = _section(
        GaConfig,
        "ga",
        raw.get("ga"),
        {"mutation_rate": _optional_float, "init_attempt_budget": _optional_int},
    )
    table1 = _section(Table1Spec, "table1", raw.get("table1"), {"lattice_degrees": _int_tuple})
    verify = _section(VerifySpec, "verify", raw.get("verify"))
    workers = raw.get("workers", 1)
    _expect_type("workers", workers, (int,), "an integer")
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")
    out = raw.get("out", "results")
    _expect_type("out", out, (str,), "a string")
    cfg = ExperimentConfig(
        n=n,
        graph=graph,
        agents=agents,
        phi=_phi("phi", raw.get("phi")),
        sim=sim,
        design=design,
        ga=ga,
        workers=workers,
        table1=table1,
        verify=verify,
        out=out,
    )
    try:
        DesignOracleParams(design.q, design.rho_margin)
    except ValueError as exc:
        raise ConfigError("design", str(exc)) from exc
    try:
        cfg.frozen_edge_indices()
    except ValueError as exc:
        raise ConfigError("design.frozen_edges", str(exc)) from exc
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from exc
    if not text.strip():
        return ExperimentConfig()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return parse_config(raw)
