"""Shared fixtures: reference serial executor, toy programs, and the two
worked-example graph fixtures used across the suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import pytest

from twophase import ConflictGraph, Key
from twophase.workload import TxProgram

HB = Key("auction", 0)  # highest bid
HBER = Key("auction", 1)  # highest bidder


@dataclass(frozen=True)
class AuctionBid:
    """Open-auction bid: raise the highest bid or lose and return early.

    A winning bid reads (hb, hber) and writes (refund, hber, hb); a losing
    bid only reads hb.
    """

    tx_id: int
    bidder: int
    amount: int

    def run(self, ctx) -> None:
        hb = ctx.read(HB)
        if self.amount <= hb:
            return
        prev = ctx.read(HBER)
        ctx.write(Key("refund", prev), hb)
        ctx.write(HBER, self.bidder)
        ctx.write(HB, self.amount)


@dataclass(frozen=True)
class OpsProgram:
    """Fixed sequence of reads then writes; footprint fully predetermined."""

    tx_id: int
    reads: tuple[Key, ...] = ()
    writes: tuple[tuple[Key, int], ...] = ()

    def run(self, ctx) -> None:
        for key in self.reads:
            ctx.read(key)
        for key, value in self.writes:
            ctx.write(key, value)


class _DictCtx:
    def __init__(self, entries: dict[Key, int]):
        self.entries = entries

    def read(self, key: Key) -> int:
        return self.entries.get(key, 0)

    def write(self, key: Key, value: int) -> None:
        self.entries[key] = value


def serial_execute(
    programs: Sequence[TxProgram], entries: Mapping[Key, int]
) -> dict[Key, int]:
    """Reference oracle: run programs one by one over a plain dict."""
    state = dict(entries)
    ctx = _DictCtx(state)
    for program in programs:
        program.run(ctx)
    return state


@pytest.fixture
def abort_example_graph() -> ConflictGraph:
    """Eleven-vertex conflict graph realizing the worked abort-selection
    example: components {1,3,4,7}, {2,5,6,9}, {10,11}, plus vertex 8 on a
    cross path so nothing is degree-prunable up front."""
    g = ConflictGraph(vertices=set(range(1, 12)))
    for u, v in [
        (1, 4), (4, 3), (7, 3), (3, 1), (3, 7),  # scc {1,3,4,7}: abort 3
        (2, 5), (9, 5), (5, 6), (6, 2), (6, 9),  # scc {2,5,6,9}: abort 5
        (10, 11), (11, 10),                      # scc {10,11}: abort 10
        (1, 8), (8, 2),                          # 8 is a trivial scc
    ]:
        g.add_edge(u, v)
    return g


# Vertex weights and edge weights for the worked partition example:
# total weight 73, bound 36.5 at tau 0.5, first part {1, 3, 4, 8, 9},
# cut weight 4 from four unit-weight edges.
EXAMPLE_VERTEX_WEIGHTS = {
    1: 11, 2: 13, 3: 8, 4: 6, 5: 7, 6: 12, 7: 1, 8: 9, 9: 3, 10: 2, 11: 1,
}
EXAMPLE_EDGE_WEIGHTS = {
    (8, 9): 13,
    (4, 8): 12,
    (1, 4): 11,
    (1, 3): 10,
    (2, 6): 9,
    (6, 11): 8,
    (2, 5): 7,
    (1, 2): 1,
    (3, 6): 1,
    (4, 5): 1,
    (9, 11): 1,
}
