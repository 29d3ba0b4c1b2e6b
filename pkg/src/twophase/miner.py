"""Batching optimistic execution for the block proposer.

Each round runs the not-yet-committed transactions speculatively in
parallel, builds the conflict graph from the observed footprints, aborts a
feedback vertex set, and commits the rest in topological order while
growing the dependency graph that later drives deterministic replay.
Aborted transactions are re-executed from scratch in the next round.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .graphs import ConflictGraph, find_abort_set
from .state import Key, StateStore
from .tdg import DependencyGraph
from .workload import TxProgram


@dataclass
class TxRecord:
    program: TxProgram
    rs: dict[Key, int]
    ws: dict[Key, int]
    omega: int

    @property
    def tx_id(self) -> int:
        return self.program.tx_id


class _SpeculativeCtx:
    """Read-your-own-writes view over an immutable committed snapshot."""

    __slots__ = ("_snapshot", "_delay", "rs", "ws")

    def __init__(self, snapshot: Mapping[Key, int], delay: float):
        self._snapshot = snapshot
        self._delay = delay
        self.rs: dict[Key, int] = {}
        self.ws: dict[Key, int] = {}

    def read(self, key: Key) -> int:
        if self._delay:
            time.sleep(self._delay)
        if key in self.ws:
            return self.ws[key]
        value = self._snapshot.get(key, 0)
        self.rs.setdefault(key, value)
        return value

    def write(self, key: Key, value: int) -> None:
        if self._delay:
            time.sleep(self._delay)
        self.ws[key] = value


def execute_read_phase(
    batch: Sequence[TxProgram],
    store: StateStore,
    workers: int = 1,
    op_delay: float = 0.0,
    pool: Optional[ThreadPoolExecutor] = None,
) -> list[TxRecord]:
    """Speculatively execute every program against the committed snapshot.

    No shared state is mutated; writes stay buffered in the records.
    """
    snapshot = store.snapshot()

    def run_one(program: TxProgram) -> TxRecord:
        ctx = _SpeculativeCtx(snapshot, op_delay)
        program.run(ctx)
        omega = max(1, len(ctx.rs) + len(ctx.ws))
        return TxRecord(program, ctx.rs, ctx.ws, omega)

    if workers > 1 and len(batch) > 1:
        if pool is not None:
            return list(pool.map(run_one, batch))
        with ThreadPoolExecutor(max_workers=workers) as local_pool:
            return list(local_pool.map(run_one, batch))
    return [run_one(p) for p in batch]


def build_conflict_graph(records: Sequence[TxRecord]) -> ConflictGraph:
    """Edge (i, j) iff i's read keys intersect j's write keys, i != j."""
    g = ConflictGraph()
    for r in records:
        g.add_vertex(r.tx_id)
    # invert write sets: key -> writers
    writers: dict[Key, list[int]] = {}
    for r in records:
        for key in r.ws:
            writers.setdefault(key, []).append(r.tx_id)
    for r in records:
        for key in r.rs:
            for w in writers.get(key, ()):
                if w != r.tx_id:
                    g.add_edge(r.tx_id, w)
    return g


def commit_and_update_graph(
    record: TxRecord,
    tdg: DependencyGraph,
    order: list[int],
    store: StateStore,
    last_writer: dict[Key, int],
) -> None:
    """Apply one transaction's buffered writes and grow the schedule graph.

    For every key the transaction read that was last written inside the
    block, an edge from that writer is added carrying the observed value
    (which equals the writer's committed value, since the read phase saw
    all earlier commits).
    """
    tx_id = record.tx_id
    tdg.add_vertex(tx_id, record.program, record.omega)
    incoming: dict[int, dict[Key, int]] = {}
    for key, value in record.rs.items():
        writer = last_writer.get(key)
        if writer is not None:
            incoming.setdefault(writer, {})[key] = value
    for writer, read_set in incoming.items():
        tdg.add_edge(writer, tx_id, read_set)
    store.apply_write_set(record.ws)
    order.append(tx_id)
    for key in record.ws:
        last_writer[key] = tx_id


def _topological_commit_order(g: ConflictGraph) -> list[int]:
    """Kahn's algorithm; among ready vertices the smallest id goes first."""
    import heapq

    indeg = {v: 0 for v in g.vertices}
    succ = g.successors()
    for _, v in g.edges:
        indeg[v] += 1
    ready = [v for v in g.vertices if indeg[v] == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        v = heapq.heappop(ready)
        out.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(out) != len(g.vertices):
        raise RuntimeError("graph passed to topological commit has a cycle")
    return out


@dataclass
class RoundDetail:
    conflict_graph: ConflictGraph
    abort_set: set[int]


@dataclass
class MineMetrics:
    rounds: int = 0
    aborts_per_round: list[int] = field(default_factory=list)
    committed: int = 0
    round_seconds: list[float] = field(default_factory=list)
    rounds_detail: Optional[list[RoundDetail]] = None

    @property
    def total_aborts(self) -> int:
        return sum(self.aborts_per_round)


@dataclass
class MineResult:
    tdg: DependencyGraph
    order: list[int]
    metrics: MineMetrics


def mine_block(
    batch: Sequence[TxProgram],
    store: StateStore,
    rho: float = 1.0,
    workers: int = 1,
    op_delay: float = 0.0,
    record_rounds: bool = False,
) -> MineResult:
    """Run batching optimistic execution until the commit ratio is met."""
    if not (0 < rho <= 1):
        raise ValueError("rho must be in (0, 1]")
    if math.ceil(rho * len(batch)) < 1:
        raise ValueError("rho * |batch| must be at least 1")

    needed = math.ceil(rho * len(batch))
    tdg = DependencyGraph()
    order: list[int] = []
    last_writer: dict[Key, int] = {}
    metrics = MineMetrics(rounds_detail=[] if record_rounds else None)
    by_id = {p.tx_id: p for p in batch}
    pending = list(batch)

    pool = None
    try:
        if workers > 1:
            pool = ThreadPoolExecutor(max_workers=workers)
        while len(order) < needed:
            started = time.perf_counter()
            records = execute_read_phase(
                pending, store, workers, op_delay, pool=pool
            )
            cg = build_conflict_graph(records)
            aborts = find_abort_set(cg)
            if metrics.rounds_detail is not None:
                metrics.rounds_detail.append(RoundDetail(cg, set(aborts)))
            survivors = cg.without(aborts)
            record_of = {r.tx_id: r for r in records}
            for tx_id in _topological_commit_order(survivors):
                commit_and_update_graph(
                    record_of[tx_id], tdg, order, store, last_writer
                )
            metrics.rounds += 1
            metrics.aborts_per_round.append(len(aborts))
            metrics.round_seconds.append(time.perf_counter() - started)
            if not aborts and len(order) < needed and not pending:
                break  # pragma: no cover - defensive
            pending = [by_id[t] for t in sorted(aborts)]
            if metrics.rounds > len(batch):
                raise RuntimeError(
                    "mining failed to make progress"
                )  # pragma: no cover - each round commits >= 1 tx
    finally:
        if pool is not None:
            pool.shutdown()

    metrics.committed = len(order)
    return MineResult(tdg, order, metrics)
