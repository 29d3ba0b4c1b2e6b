"""Benchmark harness: serial baseline, mining, partitioned/total replay,
tamper injection, and CSV metrics on stdout.

Transaction execution is interpreter-bound, so thread scaling is made
visible with a configurable synthetic per-operation latency (--op-delay)
standing in for contract execution cost; with the default of 0 the timings
measure raw scheduling overhead only.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import sys
import time
from dataclasses import dataclass, fields
from random import Random
from typing import Iterator, Optional, Sequence

from .miner import mine_block
from .schedlog import ScheduleLog, build_schedule_log, encode_schedule_log
from .state import Key, StateStore
from .tdg import (
    communication_cost,
    parallelism,
    partition,
    singleton_partition,
)
from .validator import makespan_bounds, replay_block
from .workload import TxProgram, WorkloadConfig, gen_block, initial_entries

MODES = ("serial", "miner", "validator-partitioned", "validator-total")


@dataclass(frozen=True)
class ExperimentConfig:
    workload: WorkloadConfig
    mode: str = "miner"
    threads: int = 4
    rho: float = 1.0
    tau: float = 0.056
    repeats: int = 1
    tamper_seed: Optional[int] = None
    op_delay: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass
class MetricsRow:
    mode: str
    seed: int
    tx_count: int
    n_accounts: int
    skew: float
    threads: int
    rho: float
    tau: float
    repeat: str  # repeat index or "mean"
    wall_seconds: float
    serial_seconds: float
    speedup: float
    commit_ratio: float
    aborts: int
    rounds: int
    parallelism: float
    partition_count: int
    comm_bytes_partitioned: int
    comm_bytes_total: int
    makespan_lb: float
    makespan_ub: float
    fork_join_speedup: str  # slot for externally measured numbers
    verdict: str

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_row(self) -> list[str]:
        return [str(getattr(self, f.name)) for f in fields(self)]

    @classmethod
    def from_row(cls, row: Sequence[str]) -> "MetricsRow":
        named = dict(zip(cls.header(), row))
        return cls(
            mode=named["mode"],
            seed=int(named["seed"]),
            tx_count=int(named["tx_count"]),
            n_accounts=int(named["n_accounts"]),
            skew=float(named["skew"]),
            threads=int(named["threads"]),
            rho=float(named["rho"]),
            tau=float(named["tau"]),
            repeat=named["repeat"],
            wall_seconds=float(named["wall_seconds"]),
            serial_seconds=float(named["serial_seconds"]),
            speedup=float(named["speedup"]),
            commit_ratio=float(named["commit_ratio"]),
            aborts=int(named["aborts"]),
            rounds=int(named["rounds"]),
            parallelism=float(named["parallelism"]),
            partition_count=int(named["partition_count"]),
            comm_bytes_partitioned=int(named["comm_bytes_partitioned"]),
            comm_bytes_total=int(named["comm_bytes_total"]),
            makespan_lb=float(named["makespan_lb"]),
            makespan_ub=float(named["makespan_ub"]),
            fork_join_speedup=named["fork_join_speedup"],
            verdict=named["verdict"],
        )


class _SerialCtx:
    __slots__ = ("entries", "delay")

    def __init__(self, entries: dict[Key, int], delay: float):
        self.entries = entries
        self.delay = delay

    def read(self, key: Key) -> int:
        if self.delay:
            time.sleep(self.delay)
        return self.entries.get(key, 0)

    def write(self, key: Key, value: int) -> None:
        if self.delay:
            time.sleep(self.delay)
        self.entries[key] = value


def serial_baseline(
    batch: Sequence[TxProgram], store: StateStore, op_delay: float = 0.0
) -> tuple[bytes, float]:
    """Execute the block in order on one thread; the speedup denominator."""
    entries = dict(store.snapshot())
    ctx = _SerialCtx(entries, op_delay)
    started = time.perf_counter()
    for program in batch:
        program.run(ctx)
    elapsed = time.perf_counter() - started
    store.restore(entries)
    return store.digest(), elapsed


@dataclass(frozen=True)
class TamperInfo:
    edge: tuple[int, int]
    key: Key
    old_value: int
    new_value: int


def inject_tamper(
    log: ScheduleLog, rng: Random
) -> Optional[tuple[ScheduleLog, TamperInfo]]:
    """Mutate exactly one value in the cut-edge table.

    Returns None when the log has no cut edges (tampering not applicable).
    The mutated log re-encodes with fresh checksums, so only semantic
    verification can catch it.
    """
    candidates = sorted(log.cut_edges)
    if not candidates:
        return None
    edge = candidates[rng.randrange(len(candidates))]
    tampered = copy.deepcopy(log)
    read_set = tampered.cut_edges[edge]
    key = sorted(read_set)[rng.randrange(len(read_set))]
    old = read_set[key]
    new = old + 1 + rng.randrange(1000)
    read_set[key] = new
    return tampered, TamperInfo(edge, key, old, new)


def run_experiment(cfg: ExperimentConfig) -> Iterator[MetricsRow]:
    """Yield one metrics row per repeat plus a final mean row."""
    block = gen_block(cfg.workload)
    base_entries = initial_entries(cfg.workload)
    w = cfg.workload
    rows: list[MetricsRow] = []

    for repeat in range(cfg.repeats):
        serial_store = StateStore(base_entries)
        _, serial_seconds = serial_baseline(block, serial_store, cfg.op_delay)

        row = MetricsRow(
            mode=cfg.mode,
            seed=w.seed,
            tx_count=w.tx_count,
            n_accounts=w.n_accounts,
            skew=w.skew,
            threads=cfg.threads,
            rho=cfg.rho,
            tau=cfg.tau,
            repeat=str(repeat),
            wall_seconds=serial_seconds,
            serial_seconds=serial_seconds,
            speedup=1.0,
            commit_ratio=1.0,
            aborts=0,
            rounds=1,
            parallelism=1.0,
            partition_count=0,
            comm_bytes_partitioned=0,
            comm_bytes_total=0,
            makespan_lb=0.0,
            makespan_ub=0.0,
            fork_join_speedup="",
            verdict="",
        )

        if cfg.mode != "serial":
            mine_store = StateStore(base_entries)
            started = time.perf_counter()
            result = mine_block(
                block,
                mine_store,
                rho=cfg.rho,
                workers=cfg.threads,
                op_delay=cfg.op_delay,
            )
            mine_seconds = time.perf_counter() - started

            part = partition(result.tdg, cfg.tau)
            total_part = singleton_partition(result.tdg)
            cost_part = communication_cost(result.tdg, part)
            cost_total = communication_cost(result.tdg, total_part)
            psi = result.tdg.total_weight()
            max_part = max(
                (sum(result.tdg.omega[v] for v in p) for p in part.parts),
                default=0,
            )
            tau_actual = max_part / psi if psi else 1.0
            lb, ub = makespan_bounds(psi, cfg.threads, max(tau_actual, 1e-9))

            row.commit_ratio = result.metrics.committed / len(block)
            row.aborts = result.metrics.total_aborts
            row.rounds = result.metrics.rounds
            row.parallelism = parallelism(result.tdg)
            row.partition_count = part.k
            row.comm_bytes_partitioned = cost_part.total
            row.comm_bytes_total = cost_total.total
            row.makespan_lb = lb
            row.makespan_ub = ub

            if cfg.mode == "miner":
                row.wall_seconds = mine_seconds
                row.speedup = serial_seconds / mine_seconds
            else:
                chosen = part if cfg.mode == "validator-partitioned" else total_part
                if cfg.mode == "validator-total":
                    row.partition_count = total_part.k
                pre_digest = StateStore(base_entries).digest()
                log = build_schedule_log(
                    result.tdg, result.order, chosen, pre_digest
                )
                if cfg.tamper_seed is not None:
                    tampered = inject_tamper(
                        log, Random(cfg.tamper_seed + repeat)
                    )
                    if tampered is None:
                        row.verdict = "not-applicable"
                    else:
                        log = tampered[0]
                if row.verdict != "not-applicable":
                    replay_store = StateStore(base_entries)
                    report = replay_block(
                        log, replay_store, cfg.threads, cfg.op_delay
                    )
                    row.wall_seconds = report.wall_seconds
                    row.speedup = serial_seconds / report.wall_seconds
                    row.verdict = report.verdict.outcome

        rows.append(row)
        yield row

    yield _mean_row(rows)


def _mean_row(rows: list[MetricsRow]) -> MetricsRow:
    mean = copy.copy(rows[0])
    mean.repeat = "mean"
    n = len(rows)
    for name in (
        "wall_seconds",
        "serial_seconds",
        "speedup",
        "commit_ratio",
        "parallelism",
    ):
        setattr(mean, name, sum(getattr(r, name) for r in rows) / n)
    return mean


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="twophase-bench",
        description="Two-phase concurrent execution benchmark harness",
    )
    p.add_argument("--mode", choices=MODES, default="miner")
    p.add_argument("--tx-count", type=int, default=400)
    p.add_argument("--n-accounts", type=int, default=1000)
    p.add_argument("--skew", type=float, default=0.1)
    p.add_argument("--initial-balance", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=0.056)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--op-delay", type=float, default=0.0,
                   help="synthetic seconds of work per read/write operation")
    p.add_argument("--tamper", action="store_true",
                   help="mutate one cut-edge value before replay")
    p.add_argument("--tamper-seed", type=int, default=0)
    p.add_argument("--dump-log", metavar="PATH",
                   help="write the encoded schedule log of the first repeat")
    p.add_argument("--dump-abort-report", metavar="PATH",
                   help="write a text report of per-round abort selection")
    p.add_argument("--config", metavar="PATH",
                   help="key=value workload config file (flags override)")
    return p


def _experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        base = WorkloadConfig.from_file(args.config)
        defaults = _build_parser().parse_args([])
        workload = WorkloadConfig(
            tx_count=args.tx_count if args.tx_count != defaults.tx_count else base.tx_count,
            n_accounts=args.n_accounts if args.n_accounts != defaults.n_accounts else base.n_accounts,
            skew=args.skew if args.skew != defaults.skew else base.skew,
            initial_balance=args.initial_balance if args.initial_balance != defaults.initial_balance else base.initial_balance,
            seed=args.seed if args.seed != defaults.seed else base.seed,
        )
    else:
        workload = WorkloadConfig(
            tx_count=args.tx_count,
            n_accounts=args.n_accounts,
            skew=args.skew,
            initial_balance=args.initial_balance,
            seed=args.seed,
        )
    return ExperimentConfig(
        workload=workload,
        mode=args.mode,
        threads=args.threads,
        rho=args.rho,
        tau=args.tau,
        repeats=args.repeats,
        tamper_seed=args.tamper_seed if args.tamper else None,
        op_delay=args.op_delay,
    )


def _dump_artifacts(args: argparse.Namespace, cfg: ExperimentConfig) -> None:
    block = gen_block(cfg.workload)
    store = StateStore(initial_entries(cfg.workload))
    pre_digest = store.digest()
    result = mine_block(
        block, store, rho=cfg.rho, workers=cfg.threads,
        record_rounds=bool(args.dump_abort_report),
    )
    if args.dump_log:
        part = partition(result.tdg, cfg.tau)
        log = build_schedule_log(result.tdg, result.order, part, pre_digest)
        with open(args.dump_log, "wb") as fh:
            fh.write(encode_schedule_log(log))
    if args.dump_abort_report:
        from .graphs import find_sccs

        lines = []
        for i, detail in enumerate(result.metrics.rounds_detail or []):
            lines.append(f"round {i}")
            sccs = find_sccs(detail.conflict_graph)
            for comp in sccs.components:
                if len(comp) > 1:
                    lines.append(f"  scc: {sorted(comp)}")
            lines.append(f"  abort set: {sorted(detail.abort_set)}")
        with open(args.dump_abort_report, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _experiment_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(MetricsRow.header())
    detection_failed = False
    for row in run_experiment(cfg):
        writer.writerow(row.to_row())
        if (
            cfg.tamper_seed is not None
            and row.repeat != "mean"
            and row.verdict not in ("malicious", "not-applicable")
        ):
            detection_failed = True
    sys.stdout.write(out.getvalue())

    if args.dump_log or args.dump_abort_report:
        _dump_artifacts(args, cfg)
    return 1 if detection_failed else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
