#!/usr/bin/env python3
"""Sweep the partition budget tau and report communication cost and
partition shape, averaged over seeded blocks.

Usage:
    python scripts/run_tau_sweep.py [--tx-count 400] [--skew 0.7]
        [--n-accounts 10000] [--seeds 10] [--taus 0.0035,0.007,...]
"""

import argparse
import csv
import sys

from twophase import (
    StateStore,
    WorkloadConfig,
    gen_block,
    initial_entries,
    mine_block,
    parallelism,
    partition,
    singleton_partition,
)
from twophase.tdg import communication_cost


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--tx-count", type=int, default=400)
    p.add_argument("--skew", type=float, default=0.7)
    p.add_argument("--n-accounts", type=int, default=10_000)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument(
        "--taus", default="0.0035,0.007,0.015,0.028,0.056",
        help="comma-separated budgets",
    )
    args = p.parse_args()
    taus = [float(t) for t in args.taus.split(",")]

    mined = []
    for seed in range(args.seeds):
        cfg = WorkloadConfig(
            tx_count=args.tx_count,
            n_accounts=args.n_accounts,
            skew=args.skew,
            seed=seed,
        )
        store = StateStore(initial_entries(cfg))
        result = mine_block(gen_block(cfg), store)
        mined.append(result)

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(
        ["tau", "parts", "cut_value_bytes", "total_bytes",
         "per_vertex_value_bytes", "reduction", "parallelism"]
    )
    baseline = [
        communication_cost(r.tdg, singleton_partition(r.tdg)).cut_value_bytes
        for r in mined
    ]
    mean_base = sum(baseline) / len(baseline)
    mean_pi = sum(parallelism(r.tdg) for r in mined) / len(mined)
    for tau in taus:
        parts, cut_bytes, totals = [], [], []
        for r in mined:
            part = partition(r.tdg, tau)
            cost = communication_cost(r.tdg, part)
            parts.append(part.k)
            cut_bytes.append(cost.cut_value_bytes)
            totals.append(cost.total)
        mean_cut = sum(cut_bytes) / len(cut_bytes)
        writer.writerow([
            tau,
            f"{sum(parts) / len(parts):.1f}",
            f"{mean_cut:.0f}",
            f"{sum(totals) / len(totals):.0f}",
            f"{mean_base:.0f}",
            f"{1 - mean_cut / mean_base:.2%}",
            f"{mean_pi:.3f}",
        ])
    return 0


if __name__ == "__main__":
    sys.exit(main())
