"""Deterministic multi-threaded replay of a schedule log.

Worker threads pull whole partitions from a shared queue (heaviest first)
and execute each partition's transactions in serialization order.  Reads
resolve against the transaction's own write set, then the shipped cut-edge
values, then the in-part predecessor outputs, then committed storage.
Commits are globally gated so write-backs happen exactly in the miner's
serialization order; a transaction never waits during its read phase, so
replay is non-blocking and rollback-free for honest logs.

The transaction that is next in the commit order switches to fast mode:
its pending validation runs immediately, buffered writes are flushed, and
the rest of its operations read and write storage directly.

Tamper checking is embedded: every committing transaction compares the
read-set values it shipped (as producer) and consumed (as consumer) against
the actually committed writes; the first mismatch in commit order aborts
the block and restores the pre-block state.
"""

from __future__ import annotations

import heapq
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .schedlog import ScheduleLog
from .state import Key, StateStore


class PreStateMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    outcome: str  # "valid" or "malicious"
    tx_id: Optional[int] = None
    key: Optional[Key] = None
    expected: Optional[int] = None
    received: Optional[int] = None

    @property
    def valid(self) -> bool:
        return self.outcome == "valid"


VALID = Verdict("valid")


@dataclass
class ReplayReport:
    verdict: Verdict
    digest: bytes
    commits: int
    wall_seconds: float
    makespan_sim: float
    thread_busy: list[float]
    fast_mode_count: int
    commit_order: list[int]  # tx ids in write-back order


def makespan_bounds(psi: float, m: int, tau: float) -> tuple[float, float]:
    """Lower/upper bounds on replaying total cost psi on m cores when no
    part exceeds a tau fraction of the total."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not (0 < tau <= 1):
        raise ValueError("tau must be in (0, 1]")
    return psi / m, psi * ((1 - tau) / m + tau)


def simulate_makespan(part_weights: Sequence[float], m: int) -> float:
    """Longest-processing-time list schedule of the parts onto m cores."""
    if m < 1:
        raise ValueError("m must be >= 1")
    loads = [0.0] * min(m, max(1, len(part_weights)))
    heapq.heapify(loads)
    for w in sorted(part_weights, reverse=True):
        heapq.heappush(loads, heapq.heappop(loads) + w)
    return max(loads)


class _TxState:
    __slots__ = (
        "seq",
        "tx_id",
        "program",
        "omega",
        "cut_in",
        "in_cut_edges",
        "intra_keys",
        "in_intra_edges",
        "out_cut",
        "out_intra",
    )

    def __init__(self, seq: int, tx_id: int, program, omega: int):
        self.seq = seq
        self.tx_id = tx_id
        self.program = program
        self.omega = omega
        self.cut_in: dict[Key, int] = {}
        self.in_cut_edges: list[tuple[int, dict[Key, int]]] = []
        self.intra_keys: set[Key] = set()
        self.in_intra_edges: list[tuple[int, tuple[Key, ...]]] = []
        self.out_cut: list[tuple[int, dict[Key, int]]] = []
        self.out_intra: list[tuple[int, tuple[Key, ...]]] = []


class _ReplayCtx:
    """Per-transaction execution view; handles the normal/fast mode split."""

    __slots__ = ("rep", "st", "overlay", "ws", "fast", "switched_midway")

    def __init__(self, rep: "_Replay", st: _TxState, overlay: dict[Key, int]):
        self.rep = rep
        self.st = st
        self.overlay = overlay
        self.ws: dict[Key, int] = {}
        self.fast = False
        self.switched_midway = False

    def _boundary(self) -> None:
        # fast-mode eligibility is re-checked at every operation boundary
        rep = self.rep
        if (
            not self.fast
            and not rep.failed
            and rep.seq_c == self.st.seq - 1
        ):
            rep._enter_fast(self)

    def read(self, key: Key) -> int:
        rep = self.rep
        if rep.op_delay:
            time.sleep(rep.op_delay)
        self._boundary()
        if key in self.ws:
            return self.ws[key]
        if self.fast:
            value = rep.store.get(key)
            return 0 if value is None else value
        st = self.st
        if key in st.cut_in:
            return st.cut_in[key]
        if key in st.intra_keys and key in self.overlay:
            return self.overlay[key]
        value = rep.store.get(key)
        return 0 if value is None else value

    def write(self, key: Key, value: int) -> None:
        rep = self.rep
        if rep.op_delay:
            time.sleep(rep.op_delay)
        self._boundary()
        self.ws[key] = value
        if self.fast:
            rep.store.set(key, value)


class _Replay:
    def __init__(
        self,
        log: ScheduleLog,
        store: StateStore,
        threads: int,
        op_delay: float,
    ):
        self.store = store
        self.op_delay = op_delay
        self.threads = threads
        self.base_entries = store.snapshot()

        seq_of = {t.tx_id: i for i, t in enumerate(log.txs)}
        self.states = [
            _TxState(i, t.tx_id, t.program, t.omega)
            for i, t in enumerate(log.txs)
        ]
        by_id = {st.tx_id: st for st in self.states}
        for (u, v), read_set in log.cut_edges.items():
            by_id[v].cut_in.update(read_set)
            by_id[v].in_cut_edges.append((u, read_set))
            by_id[u].out_cut.append((v, read_set))
        for (u, v), keys in log.intra_edges.items():
            by_id[v].intra_keys.update(keys)
            by_id[v].in_intra_edges.append((u, keys))
            by_id[u].out_intra.append((v, keys))

        # heaviest parts first so the measured makespan tracks the LPT bound
        parts = [
            sorted((by_id[t] for t in part), key=lambda s: s.seq)
            for part in log.parts
            if part
        ]
        self.part_weights = [sum(s.omega for s in p) for p in parts]
        order = sorted(
            range(len(parts)),
            key=lambda i: (-self.part_weights[i], parts[i][0].seq),
        )
        self._queue = [parts[i] for i in order]
        self._queue_lock = threading.Lock()

        self.commit_lock = threading.Lock()
        self.seq_c = -1
        self.ready: dict[int, tuple[_TxState, dict[Key, int]]] = {}
        self.committed_ws: dict[int, dict[Key, int]] = {}
        self.commit_order: list[int] = []
        self.fast_count = 0
        self.failed = False
        self.verdict = VALID
        self._fail_lock = threading.Lock()

    # -- verification ---------------------------------------------------

    def _verify_incoming(self, st: _TxState) -> Optional[Verdict]:
        for u, shipped in st.in_cut_edges:
            actual_ws = self.committed_ws.get(u, {})
            for key, received in shipped.items():
                expected = actual_ws.get(key)
                if expected != received:
                    return Verdict("malicious", st.tx_id, key, expected, received)
        for u, keys in st.in_intra_edges:
            actual_ws = self.committed_ws.get(u, {})
            for key in keys:
                if key not in actual_ws:
                    return Verdict("malicious", st.tx_id, key, None, None)
        return None

    def _verify_outgoing(
        self, st: _TxState, ws: dict[Key, int]
    ) -> Optional[Verdict]:
        # producer side: recompute the consistent sets this transaction
        # supplies and compare against what the log shipped
        for _, shipped in st.out_cut:
            for key, received in shipped.items():
                expected = ws.get(key)
                if expected != received:
                    return Verdict("malicious", st.tx_id, key, expected, received)
        for _, keys in st.out_intra:
            for key in keys:
                if key not in ws:
                    return Verdict("malicious", st.tx_id, key, None, None)
        return None

    def _fail(self, verdict: Verdict) -> None:
        with self._fail_lock:
            if self.failed:
                return
            self.verdict = verdict
            self.failed = True
            self.store.restore(self.base_entries)

    # -- commit machinery -----------------------------------------------

    def _enter_fast(self, ctx: _ReplayCtx) -> None:
        """Move validation forward and switch to direct writes."""
        verdict = self._verify_incoming(ctx.st)
        if verdict is not None:
            self._fail(verdict)
            return
        if ctx.ws:
            ctx.switched_midway = True
            self.store.apply_write_set(ctx.ws)
        ctx.fast = True

    def _commit_fast(self, st: _TxState, ctx: _ReplayCtx) -> None:
        verdict = self._verify_outgoing(st, ctx.ws)
        if verdict is not None:
            self._fail(verdict)
            return
        with self.commit_lock:
            self.committed_ws[st.tx_id] = ctx.ws
            self.commit_order.append(st.tx_id)
            self.fast_count += 1
            self.seq_c = st.seq

    def _drain(self) -> None:
        if self.failed:
            return
        with self.commit_lock:
            while not self.failed:
                entry = self.ready.pop(self.seq_c + 1, None)
                if entry is None:
                    break
                st, ws = entry
                verdict = self._verify_incoming(st) or self._verify_outgoing(
                    st, ws
                )
                if verdict is not None:
                    self._fail(verdict)
                    break
                self.store.apply_write_set(ws)
                self.committed_ws[st.tx_id] = ws
                self.commit_order.append(st.tx_id)
                self.seq_c = st.seq

    # -- execution -------------------------------------------------------

    def _run_tx(self, st: _TxState, overlay: dict[Key, int]) -> None:
        ctx = _ReplayCtx(self, st, overlay)
        ctx._boundary()
        st.program.run(ctx)
        if self.failed:
            return
        overlay.update(ctx.ws)
        if ctx.fast:
            self._commit_fast(st, ctx)
        else:
            self.ready[st.seq] = (st, ctx.ws)

    def _next_part(self) -> Optional[list[_TxState]]:
        with self._queue_lock:
            return self._queue.pop(0) if self._queue else None

    def _run_part(self, part: list[_TxState]) -> None:
        overlay: dict[Key, int] = {}
        for st in part:
            if self.failed:
                return
            self._run_tx(st, overlay)
            self._drain()

    def run(self) -> ReplayReport:
        started = time.perf_counter()
        busy = [0.0] * self.threads
        if self.threads == 1:
            t0 = time.perf_counter()
            while not self.failed:
                part = self._next_part()
                if part is None:
                    break
                self._run_part(part)
            self._drain()
            busy[0] = time.perf_counter() - t0
        else:
            workers = [
                threading.Thread(target=self._thread_main, args=(busy, i))
                for i in range(self.threads)
            ]
            for w in workers:
                w.start()
            for w in workers:
                w.join()
        wall = time.perf_counter() - started
        makespan = (
            simulate_makespan(self.part_weights, self.threads)
            if self.part_weights
            else 0.0
        )
        return ReplayReport(
            verdict=self.verdict,
            digest=self.store.digest(),
            commits=len(self.commit_order),
            wall_seconds=wall,
            makespan_sim=makespan,
            thread_busy=busy,
            fast_mode_count=self.fast_count,
            commit_order=list(self.commit_order),
        )

    def _thread_main(self, busy: list[float], slot: int) -> None:
        t0 = time.perf_counter()
        while not self.failed:
            part = self._next_part()
            if part is None:
                break
            self._run_part(part)
        self._drain()
        busy[slot] = time.perf_counter() - t0


def replay_block(
    log: ScheduleLog,
    store: StateStore,
    threads: int = 1,
    op_delay: float = 0.0,
) -> ReplayReport:
    """Replay a schedule log against the pre-block state.

    Raises PreStateMismatch when the store does not match the log header.
    On a malicious verdict, the store is restored to the pre-block state.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if store.digest() != log.pre_digest:
        raise PreStateMismatch("store state does not match the log header")
    return _Replay(log, store, threads, op_delay).run()
