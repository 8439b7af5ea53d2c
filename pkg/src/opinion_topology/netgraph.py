"""Undirected simple graphs, the canonical edge-bit encoding and seeded generators.

Node pairs ``(i, j)`` with ``i < j`` are numbered row-major over the strict
upper triangle of the adjacency matrix, so for ``n = 4`` the order is
``(0,1) (0,2) (0,3) (1,2) (1,3) (2,3)``.  A topology is then a 0/1 vector of
length ``n(n-1)/2`` and a topology change is the XOR of two such vectors.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "EdgeBitVector",
    "edge_count_for",
    "edge_index",
    "edge_pair",
    "sign_map",
    "apply_changes",
    "hamming",
    "degrees",
    "gen_empty",
    "gen_complete",
    "gen_erdos_renyi",
    "gen_ring_lattice",
    "gen_star",
    "gen_small_world",
    "connected_components",
    "is_connected",
    "write_edge_list",
    "read_edge_list",
    "format_edge_list",
    "parse_edge_list",
    "bits_from_pairs",
]


def edge_count_for(n: int) -> int:
    """Number of unordered node pairs, ``n(n-1)/2``."""
    return n * (n - 1) // 2


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    The adjacency matrix is stored as a read-only ``int8`` array.
    """

    n: int
    adjacency: np.ndarray

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"graph needs at least one node, got n={self.n}")
        adj = np.array(self.adjacency)
        if adj.shape != (self.n, self.n):
            raise ValueError(f"adjacency must be {self.n}x{self.n}, got {adj.shape}")
        if not np.all((adj == 0) | (adj == 1)):
            raise ValueError("adjacency entries must be exactly 0 or 1")
        if np.any(np.diag(adj) != 0):
            raise ValueError("adjacency must have a zero diagonal (no self-loops)")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        object.__setattr__(self, "adjacency", _frozen(adj.astype(np.int8)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> Graph:
        adj = np.zeros((n, n), dtype=np.int8)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop ({i}, {j}) not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            adj[i, j] = adj[j, i] = 1
        return cls(n, adj)

    @classmethod
    def from_bits(cls, bits: EdgeBitVector) -> Graph:
        adj = np.zeros((bits.n, bits.n), dtype=np.int8)
        iu, ju = np.triu_indices(bits.n, k=1)
        adj[iu, ju] = bits.bits
        adj[ju, iu] = bits.bits
        return cls(bits.n, adj)

    def to_bits(self) -> EdgeBitVector:
        iu, ju = np.triu_indices(self.n, k=1)
        return EdgeBitVector(self.n, self.adjacency[iu, ju])

    def edges(self) -> list[tuple[int, int]]:
        """Edges as ``(i, j)`` pairs with ``i < j`` in lexicographic order."""
        iu, ju = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(i), int(j)) for i, j in zip(iu, ju)]

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2

    def degrees(self) -> np.ndarray:
        return degrees(self)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self) -> int:
        return hash((self.n, self.adjacency.tobytes()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.edge_count})"


@dataclass(frozen=True, eq=False)
class EdgeBitVector:
    """0/1 vector over the canonical node-pair order.

    Used both for full topologies and for change vectors.
    """

    n: int
    bits: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.bits)
        if b.ndim != 1 or b.size != edge_count_for(self.n):
            raise ValueError(
                f"bit vector for n={self.n} must have length {edge_count_for(self.n)}, "
                f"got shape {b.shape}"
            )
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("bit vector entries must be 0 or 1")
        object.__setattr__(self, "bits", _frozen(b.astype(np.uint8)))

    @classmethod
    def zeros(cls, n: int) -> EdgeBitVector:
        return cls(n, np.zeros(edge_count_for(n), dtype=np.uint8))

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> EdgeBitVector:
        b = np.zeros(edge_count_for(n), dtype=np.uint8)
        b[list(indices)] = 1
        return cls(n, b)

    def __len__(self) -> int:
        return int(self.bits.size)

    def popcount(self) -> int:
        return int(self.bits.sum())

    def indices(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.bits)]

    def key(self) -> bytes:
        """Hashable key, also the lexicographic sort key of the bits."""
        return self.bits.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EdgeBitVector):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.n, self.key()))

    def __repr__(self) -> str:
        return f"EdgeBitVector(n={self.n}, ones={self.indices()})"


def edge_index(i: int, j: int, n: int) -> int:
    """Canonical index of the pair ``(i, j)``; requires ``0 <= i < j < n``."""
    if i == j:
        raise ValueError(f"self-loop ({i}, {j}) has no edge index")
    if not (0 <= i < j < n):
        raise ValueError(f"need 0 <= i < j < n, got i={i}, j={j}, n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def edge_pair(k: int, n: int) -> tuple[int, int]:
    """Inverse of :func:`edge_index`."""
    if not (0 <= k < edge_count_for(n)):
        raise ValueError(f"edge index {k} out of range for n={n}")
    i = 0
    row = n - 1
    while k >= row:
        k -= row
        i += 1
        row -= 1
    return i, i + 1 + k


def sign_map(x0: EdgeBitVector) -> np.ndarray:
    """+1 where toggling the pair adds an edge, -1 where it removes one."""
    return np.where(x0.bits == 0, 1, -1).astype(np.int8)


def apply_changes(x0: EdgeBitVector, x: EdgeBitVector) -> EdgeBitVector:
    """Topology ``x0 + x * S(x0)``, i.e. ``x0 XOR x``."""
    if x0.n != x.n:
        raise ValueError(f"node counts differ: {x0.n} vs {x.n}")
    out = x0.bits.astype(np.int16) + x.bits.astype(np.int16) * sign_map(x0)
    return EdgeBitVector(x0.n, out.astype(np.uint8))


def hamming(a: EdgeBitVector, b: EdgeBitVector) -> int:
    if a.n != b.n:
        raise ValueError(f"node counts differ: {a.n} vs {b.n}")
    return int(np.count_nonzero(a.bits != b.bits))


def degrees(g: Graph) -> np.ndarray:
    return g.adjacency.sum(axis=1).astype(np.int64)


# -- generators --------------------------------------------------------------


def gen_empty(n: int) -> Graph:
    return Graph(n, np.zeros((n, n), dtype=np.int8))


def gen_complete(n: int) -> Graph:
    return Graph(n, (1 - np.eye(n, dtype=np.int8)).astype(np.int8))


def gen_erdos_renyi(n: int, p: float, seed: int | None = None) -> Graph:
    """G(n, p): each pair is an edge independently with probability ``p``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    bits = (rng.random(edge_count_for(n)) < p).astype(np.uint8)
    return Graph.from_bits(EdgeBitVector(n, bits))


def _ring_offsets(n: int, d: int) -> range:
    if d < 0 or d % 2:
        raise ValueError(f"lattice degree must be even and >= 0, got {d}")
    if d > n - 1:
        raise ValueError(f"lattice degree {d} too large for n={n}")
    return range(1, d // 2 + 1)


def gen_ring_lattice(n: int, d: int) -> Graph:
    """Circulant graph where node ``i`` links to ``i±1, ..., i±d/2`` (mod n)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    offsets = _ring_offsets(n, d)
    adj = np.zeros((n, n), dtype=np.int8)
    idx = np.arange(n)
    for o in offsets:
        adj[idx, (idx + o) % n] = 1
        adj[(idx + o) % n, idx] = 1
    return Graph(n, adj)


def gen_star(n: int) -> Graph:
    """Star with hub 0."""
    if n < 2:
        raise ValueError(f"a star needs n >= 2, got {n}")
    return Graph.from_edges(n, ((0, j) for j in range(1, n)))


def gen_small_world(n: int, d: int, beta: float, seed: int | None = None) -> Graph:
    """Watts-Strogatz rewiring of ``gen_ring_lattice(n, d)``.

    Each lattice edge ``(i, i+o)`` is visited once (offset-major, then node)
    and with probability ``beta`` its far endpoint is moved to a uniformly
    drawn node that is neither ``i`` nor a current neighbour of ``i``.  Bad
    draws are retried up to ``n`` times, after which the edge is left alone,
    so the edge count ``nd/2`` is always preserved.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"rewiring probability must be in [0, 1], got {beta}")
    if d >= n - 1 and d > 0:
        raise ValueError(f"small-world degree must satisfy d < n-1, got d={d}, n={n}")
    lattice = gen_ring_lattice(n, d)
    adj = lattice.adjacency.copy()
    rng = np.random.default_rng(seed)
    for o in range(1, d // 2 + 1):
        for i in range(n):
            if rng.random() >= beta:
                continue
            v = (i + o) % n
            for _ in range(n):
                w = int(rng.integers(n))
                if w != i and adj[i, w] == 0:
                    adj[i, v] = adj[v, i] = 0
                    adj[i, w] = adj[w, i] = 1
                    break
    return Graph(n, adj)


# -- connectivity ------------------------------------------------------------


def connected_components(g: Graph) -> list[list[int]]:
    """Components as sorted node lists, ordered by their smallest node."""
    seen = np.zeros(g.n, dtype=bool)
    comps: list[list[int]] = []
    for start in range(g.n):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(g.adjacency[u]):
                if not seen[v]:
                    seen[v] = True
                    comp.append(int(v))
                    queue.append(int(v))
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    return len(connected_components(g)) == 1


# -- edge-list persistence ---------------------------------------------------


def format_edge_list(g: Graph) -> str:
    lines = [f"n {g.n}"] + [f"{i} {j}" for i, j in g.edges()]
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> Graph:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty edge list")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n":
        raise ValueError(f"edge list must start with 'n <count>', got {lines[0]!r}")
    n = int(head[1])
    edges: list[tuple[int, int]] = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        edges.append((min(i, j), max(i, j)))
    return Graph.from_edges(n, edges)


def write_edge_list(g: Graph, path: str | Path) -> None:
    Path(path).write_text(format_edge_list(g))


def read_edge_list(path: str | Path) -> Graph:
    return parse_edge_list(Path(path).read_text())


def bits_from_pairs(n: int, pairs: Sequence[tuple[int, int]]) -> EdgeBitVector:
    return EdgeBitVector.from_indices(n, (edge_index(min(i, j), max(i, j), n) for i, j in pairs))
