#!/usr/bin/env python3
"""Measure miner and validator wall-clock scaling across thread counts.

Per-operation work is synthesized with a sleep (released by the
interpreter lock), so speedups reflect scheduling rather than bytecode
throughput.

Usage:
    python scripts/run_thread_sweep.py [--skews 0.1,0.5,0.7]
        [--threads 1,2,4,8] [--op-delay 5e-5] [--repeats 2]
"""

import argparse
import csv
import sys
import time

from twophase import (
    StateStore,
    WorkloadConfig,
    build_schedule_log,
    gen_block,
    initial_entries,
    mine_block,
    partition,
    replay_block,
)
from twophase.bench import serial_baseline


def best_of(repeats, fn):
    return min(fn() for _ in range(repeats))


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--tx-count", type=int, default=400)
    p.add_argument("--n-accounts", type=int, default=1000)
    p.add_argument("--skews", default="0.1,0.5,0.7")
    p.add_argument("--threads", default="1,2,4,8")
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--op-delay", type=float, default=5e-5)
    p.add_argument("--repeats", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    skews = [float(s) for s in args.skews.split(",")]
    thread_counts = [int(t) for t in args.threads.split(",")]

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(
        ["skew", "threads", "serial_s", "mine_s", "mine_speedup",
         "replay_s", "replay_speedup"]
    )
    for skew in skews:
        cfg = WorkloadConfig(
            tx_count=args.tx_count,
            n_accounts=args.n_accounts,
            skew=skew,
            seed=args.seed,
        )
        block = gen_block(cfg)
        base = initial_entries(cfg)
        _, serial_s = serial_baseline(block, StateStore(base), args.op_delay)

        # one reference mining run to build the log replayed below
        ref_store = StateStore(base)
        pre = ref_store.digest()
        ref = mine_block(block, ref_store, op_delay=0.0)
        log = build_schedule_log(
            ref.tdg, ref.order, partition(ref.tdg, args.tau), pre
        )

        for threads in thread_counts:
            def mine_once():
                store = StateStore(base)
                t0 = time.perf_counter()
                mine_block(block, store, workers=threads,
                           op_delay=args.op_delay)
                return time.perf_counter() - t0

            def replay_once():
                store = StateStore(base)
                report = replay_block(log, store, threads=threads,
                                      op_delay=args.op_delay)
                assert report.verdict.valid
                return report.wall_seconds

            mine_s = best_of(args.repeats, mine_once)
            replay_s = best_of(args.repeats, replay_once)
            writer.writerow([
                skew, threads,
                f"{serial_s:.3f}",
                f"{mine_s:.3f}", f"{serial_s / mine_s:.2f}",
                f"{replay_s:.3f}", f"{serial_s / replay_s:.2f}",
            ])
    return 0


if __name__ == "__main__":
    sys.exit(main())
