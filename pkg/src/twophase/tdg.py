"""Dependency graph over committed transactions, its sparsity metric, the
weight-constrained greedy partition, and communication-cost accounting.

Edges carry the exact values the target transaction read from the source's
committed writes; the edge weight is the canonical serialized byte length of
that value map.  Partitioning keeps heavy edges inside parts so that cheap
edges end up cut, which is what shrinks the miner-to-validator transfer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .state import Key, entry_bytes
from .workload import TxProgram


@dataclass
class DependencyGraph:
    programs: dict[int, TxProgram] = field(default_factory=dict)
    omega: dict[int, int] = field(default_factory=dict)
    edges: dict[tuple[int, int], dict[Key, int]] = field(default_factory=dict)

    def add_vertex(self, tx_id: int, program: TxProgram, weight: int) -> None:
        if weight < 1:
            raise ValueError("vertex weight must be >= 1")
        self.programs[tx_id] = program
        self.omega[tx_id] = weight

    def add_edge(self, u: int, v: int, read_set: Mapping[Key, int]) -> None:
        if not read_set:
            raise ValueError("dependency edges carry a non-empty read set")
        self.edges[(u, v)] = dict(read_set)

    def edge_weight(self, edge: tuple[int, int]) -> int:
        return entry_bytes(self.edges[edge])

    def edge_weights(self) -> dict[tuple[int, int], int]:
        return {e: entry_bytes(rs) for e, rs in self.edges.items()}

    def total_weight(self) -> int:
        return sum(self.omega.values())


def parallelism(g: DependencyGraph) -> float:
    """1 minus edge density; 1.0 for graphs that cannot have edges."""
    n = len(g.programs)
    if n <= 1:
        return 1.0
    return 1.0 - len(g.edges) / (n * (n - 1))


@dataclass
class Partition:
    parts: list[list[int]]
    part_of: dict[int, int]
    upper_bound: float
    # parts whose lone vertex alone exceeds the bound
    over_budget: list[int] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.parts)


def partition_weighted(
    vertex_weights: Mapping[int, float],
    edge_weights: Mapping[tuple[int, int], float],
    tau: float,
) -> Partition:
    """Greedy weight-constrained partition.

    Edges are visited in descending weight order (ties by vertex ids);
    each unvisited endpoint joins the current part, the start vertex first.
    A part is closed once its accumulated weight exceeds tau times the total
    weight, so a part may overshoot the bound by its final vertex; a lone
    vertex heavier than the bound becomes its own over-budget part.
    Leftover edge-free vertices are appended the same way, in id order.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    total = sum(vertex_weights.values())
    bound = total * tau

    parts: list[list[int]] = []
    current: list[int] = []
    cost = 0.0
    visited: set[int] = set()

    def place(v: int) -> None:
        nonlocal current, cost
        if current and cost > bound:
            parts.append(current)
            current = []
            cost = 0.0
        visited.add(v)
        current.append(v)
        cost += vertex_weights[v]

    for u, v in sorted(edge_weights, key=lambda e: (-edge_weights[e], e)):
        if u not in visited:
            place(u)
        if v not in visited:
            place(v)
    for v in sorted(vertex_weights):
        if v not in visited:
            place(v)
    if current:
        parts.append(current)

    part_of = {v: i for i, part in enumerate(parts) for v in part}
    over = [
        i
        for i, part in enumerate(parts)
        if len(part) == 1 and vertex_weights[part[0]] > bound
    ]
    return Partition(parts, part_of, bound, over)


def partition(g: DependencyGraph, tau: float) -> Partition:
    return partition_weighted(g.omega, g.edge_weights(), tau)


def singleton_partition(g: DependencyGraph) -> Partition:
    """Every vertex its own part: the unpartitioned per-vertex shipping mode."""
    parts = [[v] for v in sorted(g.programs)]
    part_of = {v: i for i, (v,) in enumerate(map(tuple, parts))}
    return Partition(parts, part_of, upper_bound=float(g.total_weight()))


def cut_edges(g: DependencyGraph, p: Partition) -> list[tuple[int, int]]:
    return [(u, v) for (u, v) in g.edges if p.part_of[u] != p.part_of[v]]


def cut_weight(
    edge_weights: Mapping[tuple[int, int], float], p: Partition
) -> float:
    return sum(
        w for (u, v), w in edge_weights.items() if p.part_of[u] != p.part_of[v]
    )


@dataclass(frozen=True)
class CommCost:
    structure_bytes: int
    cut_value_bytes: int

    @property
    def total(self) -> int:
        return self.structure_bytes + self.cut_value_bytes


# Per-part structure accounting: 4 bytes per vertex id plus, for every edge
# entering or leaving the part, 8 bytes of endpoint ids and the serialized
# keys (values excluded; those are counted only for cut edges).
def communication_cost(g: DependencyGraph, p: Partition) -> CommCost:
    structure = sum(4 * len(part) for part in p.parts)
    cut_values = 0
    for (u, v), read_set in g.edges.items():
        key_bytes = sum(9 + len(k.namespace) for k in read_set)
        structure += 8 + key_bytes
        if p.part_of[u] != p.part_of[v]:
            cut_values += entry_bytes(read_set)
    return CommCost(structure, cut_values)
