"""Minimum-change topology design with a genetic algorithm.

A chromosome is a full topology bit vector.  Its fitness is the (weighted)
number of node pairs where it differs from the initial topology ``x0``, and
only topologies that pass the stability oracle and the linear constraints
are ever admitted to a population.

Randomness is drawn from per-candidate streams seeded with
``(seed, generation, attempt)``, so results do not depend on how many
workers evaluate the candidates.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .dynamics import AgentParams
from .netgraph import EdgeBitVector, edge_count_for, edge_pair, sign_map
from .stability import DesignOracleParams, feasibility_oracle

__all__ = [
    "DesignProblem",
    "GaConfig",
    "Chromosome",
    "GenerationStats",
    "DesignResult",
    "ExhaustiveResult",
    "InitializationError",
    "SearchSpaceTooLarge",
    "fitness",
    "check_linear_constraints",
    "init_population",
    "select_truncation",
    "crossover",
    "crossover_at",
    "mutate",
    "run_ga",
    "exhaustive_search",
]


class InitializationError(RuntimeError):
    """No admissible initial chromosome was found within the draw budget."""


class SearchSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DesignProblem:
    x0: EdgeBitVector
    agents: AgentParams
    oracle: DesignOracleParams = field(default_factory=DesignOracleParams)
    weights: np.ndarray | None = None
    min_edges: int | None = None
    frozen_edges: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.agents.n != self.x0.n:
            raise ValueError(f"x0 has n={self.x0.n} but agents describe n={self.agents.n}")
        length = len(self.x0)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            if w.shape != (length,):
                raise ValueError(f"weights must have length {length}, got {w.shape}")
            if np.any(~(w >= 0)):
                raise ValueError("weights must be nonnegative")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        frozen = frozenset(int(k) for k in self.frozen_edges)
        bad = [k for k in frozen if not 0 <= k < length]
        if bad:
            raise ValueError(f"frozen edge indices out of range: {sorted(bad)}")
        object.__setattr__(self, "frozen_edges", frozen)
        if self.min_edges is not None and self.min_edges < 0:
            raise ValueError(f"min_edges must be >= 0, got {self.min_edges}")

    @property
    def n(self) -> int:
        return self.x0.n

    @property
    def length(self) -> int:
        return len(self.x0)

    def weight_vector(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.length)
        return self.weights

    def frozen_mask(self) -> np.ndarray:
        mask = np.zeros(self.length, dtype=bool)
        mask[list(self.frozen_edges)] = True
        return mask


@dataclass(frozen=True)
class GaConfig:
    pop_size: int = 60
    generations: int = 200
    selection_fraction: float = 0.5
    min_pop: int = 10
    mutation_rate: float | None = None  # None: 2 / (n(n-1)), one flip per chromosome on average
    init_flip_rate: float = 0.1
    init_attempt_budget: int | None = None  # None: 50 * pop_size
    breeding_budget_factor: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.pop_size < 2:
            raise ValueError(f"pop_size must be >= 2, got {self.pop_size}")
        if self.generations < 0:
            raise ValueError(f"generations must be >= 0, got {self.generations}")
        if not 0 < self.selection_fraction <= 1:
            raise ValueError(f"selection_fraction must be in (0, 1], got {self.selection_fraction}")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            raise ValueError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if not 0 <= self.init_flip_rate <= 1:
            raise ValueError(f"init_flip_rate must be in [0, 1], got {self.init_flip_rate}")
        if self.min_pop < 0:
            raise ValueError(f"min_pop must be >= 0, got {self.min_pop}")
        if self.init_attempt_budget is not None and self.init_attempt_budget < 1:
            raise ValueError("init_attempt_budget must be >= 1")
        if self.breeding_budget_factor < 1:
            raise ValueError("breeding_budget_factor must be >= 1")

    def mutation_rate_for(self, n: int) -> float:
        if self.mutation_rate is not None:
            return self.mutation_rate
        pairs = edge_count_for(n)
        return 1.0 / pairs if pairs else 0.0

    @property
    def attempt_budget(self) -> int:
        if self.init_attempt_budget is not None:
            return self.init_attempt_budget
        return 50 * self.pop_size


@dataclass(frozen=True, eq=False)
class Chromosome:
    bits: EdgeBitVector
    fitness: float

    def sort_key(self) -> tuple[float, bytes]:
        return (self.fitness, self.bits.key())


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    population: int
    candidates: int
    accepted: int

    @property
    def feasible_rate(self) -> float:
        return self.accepted / self.candidates if self.candidates else 0.0

    def to_dict(self) -> dict:
        return {
            "generation": self.generation,
            "best_fitness": self.best_fitness,
            "mean_fitness": self.mean_fitness,
            "population": self.population,
            "candidates": self.candidates,
            "accepted": self.accepted,
            "feasible_rate": self.feasible_rate,
        }


@dataclass(frozen=True, eq=False)
class DesignResult:
    x0: EdgeBitVector
    best: Chromosome
    last_generation_best: Chromosome
    history: list[GenerationStats]
    evaluations: int

    @property
    def change_vector(self) -> EdgeBitVector:
        return EdgeBitVector(self.x0.n, self.x0.bits ^ self.best.bits.bits)

    def to_dict(self) -> dict:
        signs = sign_map(self.x0)
        changes = []
        for k in self.change_vector.indices():
            i, j = edge_pair(k, self.x0.n)
            changes.append({"index": k, "pair": [i, j], "action": "add" if signs[k] > 0 else "remove"})
        return {
            "n": self.x0.n,
            "best_bits": "".join(str(int(b)) for b in self.best.bits.bits),
            "change_indices": changes,
            "fitness": self.best.fitness,
            "edges_before": self.x0.popcount(),
            "edges_after": self.best.bits.popcount(),
            "generations": len(self.history) - 1,
            "history": [h.to_dict() for h in self.history],
            "evaluations": self.evaluations,
        }


def fitness(bits: EdgeBitVector, prob: DesignProblem) -> float:
    """Weighted Hamming distance from ``prob.x0``."""
    diff = bits.bits != prob.x0.bits
    if prob.weights is None:
        return float(np.count_nonzero(diff))
    return float(prob.weights[diff].sum())


def check_linear_constraints(bits: EdgeBitVector, prob: DesignProblem) -> bool:
    if prob.min_edges is not None and bits.popcount() < prob.min_edges:
        return False
    if prob.frozen_edges:
        idx = list(prob.frozen_edges)
        if np.any(bits.bits[idx] != prob.x0.bits[idx]):
            return False
    return True


class _Evaluator:
    """Memoised admissibility test (linear constraints, then the oracle)."""

    def __init__(self, prob: DesignProblem, workers: int = 1):
        self.prob = prob
        self.workers = workers
        self.cache: dict[bytes, bool] = {}
        self.calls = 0

    def _oracle(self, bits: EdgeBitVector) -> bool:
        return feasibility_oracle(bits, self.prob.agents, self.prob.oracle).feasible

    def admissible(self, candidates: Sequence[EdgeBitVector]) -> list[bool]:
        pending: dict[bytes, EdgeBitVector] = {}
        for bits in candidates:
            key = bits.key()
            if key not in self.cache and key not in pending:
                if check_linear_constraints(bits, self.prob):
                    pending[key] = bits
                else:
                    self.cache[key] = False
        if pending:
            items = list(pending.values())
            if self.workers > 1 and len(items) > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    verdicts = list(pool.map(self._oracle, items))
            else:
                verdicts = [self._oracle(b) for b in items]
            self.calls += len(items)
            for key, ok in zip(pending, verdicts):
                self.cache[key] = ok
        return [self.cache[b.key()] for b in candidates]


def _rng(seed: int, generation: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng([seed, generation, attempt])


def _perturb(prob: DesignProblem, rate: float, rng: np.random.Generator) -> EdgeBitVector:
    flips = rng.random(prob.length) < rate
    flips &= ~prob.frozen_mask()
    return EdgeBitVector(prob.n, prob.x0.bits ^ flips.astype(np.uint8))


def _initial(prob: DesignProblem, cfg: GaConfig, ev: _Evaluator) -> tuple[list[Chromosome], int]:
    pop: list[Chromosome] = []
    budget = cfg.attempt_budget
    attempt = 0
    while len(pop) < cfg.pop_size and attempt < budget:
        batch = min(cfg.pop_size - len(pop), budget - attempt)
        cands = []
        for a in range(attempt, attempt + batch):
            if a == 0:
                cands.append(prob.x0)
            else:
                cands.append(_perturb(prob, cfg.init_flip_rate, _rng(cfg.seed, 0, a)))
        attempt += batch
        for bits, ok in zip(cands, ev.admissible(cands)):
            if ok and len(pop) < cfg.pop_size:
                pop.append(Chromosome(bits, fitness(bits, prob)))
    if not pop:
        raise InitializationError(
            f"no admissible topology among {attempt} random perturbations of x0 "
            f"(init_attempt_budget={budget}, init_flip_rate={cfg.init_flip_rate}); "
            "raise the budget or the flip rate"
        )
    return pop, attempt


def init_population(prob: DesignProblem, cfg: GaConfig, workers: int = 1) -> list[Chromosome]:
    """Admissible random perturbations of ``x0``.

    Draw 0 is ``x0`` itself (the all-zero perturbation); every later draw
    flips each non-frozen bit with probability ``init_flip_rate``.  Raises
    :class:`InitializationError` when the draw budget yields nothing.
    """
    return _initial(prob, cfg, _Evaluator(prob, workers))[0]


def _ranked(pop: Sequence[Chromosome]) -> list[Chromosome]:
    order = sorted(range(len(pop)), key=lambda i: (pop[i].fitness, pop[i].bits.key(), i))
    return [pop[i] for i in order]


def select_truncation(pop: Sequence[Chromosome], cfg: GaConfig) -> list[Chromosome]:
    """Keep the fittest ``selection_fraction`` when the population exceeds ``min_pop``.

    Ties are broken by the bit string, then by position in ``pop``.
    """
    if not pop:
        raise RuntimeError("cannot select from an empty population")
    ranked = _ranked(pop)
    if len(pop) <= cfg.min_pop:
        return ranked
    keep = math.ceil(cfg.selection_fraction * len(pop))
    return ranked[:keep]


def crossover_at(a: EdgeBitVector, b: EdgeBitVector, cut: int) -> tuple[EdgeBitVector, EdgeBitVector]:
    if len(a) != len(b):
        raise ValueError("parents must have equal length")
    if not 1 <= cut <= len(a) - 1:
        raise ValueError(f"cut point must be in 1..{len(a) - 1}, got {cut}")
    first = np.concatenate([a.bits[:cut], b.bits[cut:]])
    second = np.concatenate([b.bits[:cut], a.bits[cut:]])
    return EdgeBitVector(a.n, first), EdgeBitVector(a.n, second)


def crossover(
    parent_a: EdgeBitVector, parent_b: EdgeBitVector, rng: np.random.Generator
) -> tuple[EdgeBitVector, EdgeBitVector]:
    """One-point crossover with the cut drawn uniformly from ``1..L-1``."""
    if len(parent_a) < 2:
        raise ValueError("one-point crossover needs at least 2 bits")
    return crossover_at(parent_a, parent_b, int(rng.integers(1, len(parent_a))))


def mutate(
    bits: EdgeBitVector, cfg: GaConfig, frozen: Iterable[int], rng: np.random.Generator
) -> EdgeBitVector:
    rate = cfg.mutation_rate_for(bits.n)
    flips = rng.random(len(bits)) < rate
    frozen = list(frozen)
    if frozen:
        flips[frozen] = False
    if not flips.any():
        return bits
    return EdgeBitVector(bits.n, bits.bits ^ flips.astype(np.uint8))


def _breed(
    selected: Sequence[Chromosome], cfg: GaConfig, frozen: Sequence[int], rng: np.random.Generator
) -> tuple[EdgeBitVector, EdgeBitVector]:
    i, j = rng.integers(len(selected), size=2)
    a, b = selected[i].bits, selected[j].bits
    if len(a) >= 2:
        a, b = crossover(a, b, rng)
    return mutate(a, cfg, frozen, rng), mutate(b, cfg, frozen, rng)


def _stats(gen: int, pop: Sequence[Chromosome], candidates: int, accepted: int) -> GenerationStats:
    fits = [c.fitness for c in pop]
    return GenerationStats(gen, min(fits), float(np.mean(fits)), len(pop), candidates, accepted)


def run_ga(
    prob: DesignProblem,
    cfg: GaConfig | None = None,
    workers: int = 1,
    progress: Callable[[GenerationStats], None] | None = None,
) -> DesignResult:
    """Genetic search for an admissible topology closest to ``x0``.

    Each generation: truncation selection, survivors carried over, then
    offspring bred from random parent pairs until the population is back at
    ``pop_size`` or ``breeding_budget_factor * pop_size`` breeding attempts
    are spent.  Inadmissible offspring are discarded.
    """
    cfg = cfg or GaConfig()
    ev = _Evaluator(prob, workers)
    pop, init_draws = _initial(prob, cfg, ev)
    frozen = sorted(prob.frozen_edges)
    history = [_stats(0, pop, init_draws, len(pop))]
    if progress is not None:
        progress(history[0])
    best = _ranked(pop)[0]
    for gen in range(1, cfg.generations + 1):
        survivors = select_truncation(pop, cfg)
        nxt = list(survivors)
        budget = cfg.breeding_budget_factor * cfg.pop_size
        attempts = candidates = accepted = 0
        while len(nxt) < cfg.pop_size and attempts < budget:
            need = cfg.pop_size - len(nxt)
            batch = min(math.ceil(need / 2), budget - attempts)
            offspring: list[EdgeBitVector] = []
            for a in range(attempts, attempts + batch):
                offspring.extend(_breed(survivors, cfg, frozen, _rng(cfg.seed, gen, a)))
            attempts += batch
            for bits, ok in zip(offspring, ev.admissible(offspring)):
                if len(nxt) >= cfg.pop_size:
                    break
                candidates += 1
                if ok:
                    accepted += 1
                    nxt.append(Chromosome(bits, fitness(bits, prob)))
        pop = nxt
        stats = _stats(gen, pop, candidates, accepted)
        history.append(stats)
        if progress is not None:
            progress(stats)
        top = _ranked(pop)[0]
        if top.sort_key() < best.sort_key():
            best = top
    last_best = _ranked(pop)[0]
    # survivors carry over, so this re-check only guards against oracle drift
    assert feasibility_oracle(best.bits, prob.agents, prob.oracle).feasible
    assert check_linear_constraints(best.bits, prob)
    return DesignResult(prob.x0, best, last_best, history, ev.calls)


@dataclass(frozen=True, eq=False)
class ExhaustiveResult:
    change: EdgeBitVector | None
    fitness: float | None
    evaluations: int

    @property
    def feasible(self) -> bool:
        return self.change is not None


def exhaustive_search(prob: DesignProblem, max_bits: int = 20) -> ExhaustiveResult:
    """Exact optimum by enumerating change vectors in order of increasing cost.

    Frozen pairs are never toggled.  Returns a result with ``change=None``
    when no admissible topology exists.
    """
    if prob.length > max_bits:
        raise SearchSpaceTooLarge(
            f"{prob.length} node pairs exceed the exhaustive budget of {max_bits} bits"
        )
    free = [k for k in range(prob.length) if k not in prob.frozen_edges]
    ev = _Evaluator(prob)
    w = prob.weight_vector()

    def candidate(change_idx: Sequence[int]) -> EdgeBitVector:
        x = np.zeros(prob.length, dtype=np.uint8)
        x[list(change_idx)] = 1
        return EdgeBitVector(prob.n, prob.x0.bits ^ x)

    if np.all(w[free] == w[free][0]) if free else True:
        orders: Iterable[Sequence[int]] = itertools.chain.from_iterable(
            itertools.combinations(free, r) for r in range(len(free) + 1)
        )
    else:
        masks = np.arange(2 ** len(free), dtype=np.int64)
        bit_table = (masks[:, None] >> np.arange(len(free))) & 1
        costs = bit_table @ w[free]
        order = np.argsort(costs, kind="stable")
        orders = ([free[b] for b in np.flatnonzero(bit_table[m])] for m in order)
    for change_idx in orders:
        bits = candidate(change_idx)
        if ev.admissible([bits])[0]:
            change = EdgeBitVector(prob.n, prob.x0.bits ^ bits.bits)
            return ExhaustiveResult(change, fitness(bits, prob), ev.calls)
    return ExhaustiveResult(None, None, ev.calls)


def with_seed(cfg: GaConfig, seed: int) -> GaConfig:
    return replace(cfg, seed=seed)
