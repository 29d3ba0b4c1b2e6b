"""Batching optimistic miner: read phase, conflict graph, commit protocol."""

import pytest

from conftest import HB, HBER, AuctionBid, serial_execute
from twophase import (
    Key,
    StateStore,
    WorkloadConfig,
    build_conflict_graph,
    execute_read_phase,
    gen_block,
    initial_entries,
    mine_block,
)
from twophase.graphs import ConflictGraph, has_cycle
from twophase.miner import commit_and_update_graph
from twophase.tdg import DependencyGraph

BIDS = [AuctionBid(1, bidder=1, amount=10),
        AuctionBid(2, bidder=2, amount=20),
        AuctionBid(3, bidder=3, amount=0)]


# -- read phase -------------------------------------------------------------


def test_read_phase_footprints():
    records = execute_read_phase(BIDS, StateStore())
    by_id = {r.tx_id: r for r in records}
    # winners read the bid pair and write refund/bidder/bid
    for tx_id in (1, 2):
        assert by_id[tx_id].rs == {HB: 0, HBER: 0}
        assert set(by_id[tx_id].ws) == {Key("refund", 0), HBER, HB}
    # the losing bid reads only the current bid
    assert by_id[3].rs == {HB: 0}
    assert by_id[3].ws == {}
    assert by_id[1].omega == 5 and by_id[3].omega == 1


def test_read_phase_reads_own_writes_without_polluting_rs():
    class WriteThenRead:
        tx_id = 0

        def run(self, ctx):
            ctx.write(HB, 9)
            assert ctx.read(HB) == 9
            ctx.read(HBER)

    (record,) = execute_read_phase([WriteThenRead()], StateStore({HB: 4}))
    assert record.rs == {HBER: 0}  # the HB read was served from its own write
    assert record.ws == {HB: 9}


def test_read_phase_does_not_touch_store():
    store = StateStore({HB: 4})
    execute_read_phase(BIDS, store)
    assert dict(store.snapshot()) == {HB: 4}


def test_read_phase_parallel_matches_sequential():
    store = StateStore()
    seq = execute_read_phase(BIDS, store, workers=1)
    par = execute_read_phase(BIDS, store, workers=4)
    assert [(r.tx_id, r.rs, r.ws) for r in seq] == [
        (r.tx_id, r.rs, r.ws) for r in par
    ]


# -- conflict graph ---------------------------------------------------------


def test_conflict_graph_of_competing_bids():
    records = execute_read_phase(BIDS, StateStore())
    g = build_conflict_graph(records)
    assert g.vertices == {1, 2, 3}
    assert g.edges == {(1, 2), (2, 1), (3, 1), (3, 2)}


def test_conflict_graph_ignores_self_conflicts():
    records = execute_read_phase([BIDS[0]], StateStore())
    g = build_conflict_graph(records)
    assert g.vertices == {1} and g.edges == set()


# -- commit + dependency growth ---------------------------------------------


def test_commit_records_read_from_edges_with_observed_values():
    """Drive one mining round by hand, aborting the highest bid: the losing
    and first bids commit, then the aborted bid re-executes and must pick up
    a dependency edge carrying exactly the first bid's committed values."""
    store = StateStore()
    records = {r.tx_id: r for r in execute_read_phase(BIDS, store)}
    tdg, order, last_writer = DependencyGraph(), [], {}

    # survivors {1, 3}: edge 3->1 forces the losing bid to commit first
    commit_and_update_graph(records[3], tdg, order, store, last_writer)
    commit_and_update_graph(records[1], tdg, order, store, last_writer)
    assert order == [3, 1]
    assert tdg.edges == {}  # both read only pre-block state

    (rerun,) = execute_read_phase([BIDS[1]], store)
    commit_and_update_graph(rerun, tdg, order, store, last_writer)
    assert (1, 2) in tdg.edges
    assert tdg.edges[(1, 2)] == {HB: 10, HBER: 1}
    assert list(tdg.edges) == [(1, 2)]

    expected = serial_execute([BIDS[0], BIDS[2], BIDS[1]], {})
    assert dict(store.snapshot()) == expected


def test_mine_block_auction_two_rounds():
    store = StateStore()
    result = mine_block(BIDS, store)
    m = result.metrics
    assert m.rounds == 2
    assert m.aborts_per_round == [1, 0]
    assert m.committed == 3
    assert sorted(result.order) == [1, 2, 3]
    by_id = {tx.tx_id: tx for tx in BIDS}
    expected = serial_execute([by_id[t] for t in result.order], {})
    assert dict(store.snapshot()) == expected


@pytest.mark.parametrize("skew", [0.0, 0.7])
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_mining_matches_serial_execution_in_commit_order(skew, seed):
    cfg = WorkloadConfig(tx_count=48, n_accounts=12, skew=skew, seed=seed)
    block = gen_block(cfg)
    base = initial_entries(cfg)
    store = StateStore(base)
    result = mine_block(block, store)

    assert sorted(result.order) == [tx.tx_id for tx in block]
    by_id = {tx.tx_id: tx for tx in block}
    expected = serial_execute([by_id[t] for t in result.order], base)
    assert dict(store.snapshot()) == expected

    # dependency edges must agree with the serialization order
    pos = {t: i for i, t in enumerate(result.order)}
    for u, v in result.tdg.edges:
        assert pos[u] < pos[v]
    cg = ConflictGraph(vertices=set(result.order))
    for u, v in result.tdg.edges:
        cg.add_edge(u, v)
    assert not has_cycle(cg)


def test_mining_is_deterministic_across_worker_counts():
    cfg = WorkloadConfig(tx_count=60, n_accounts=10, skew=0.9, seed=8)
    block = gen_block(cfg)
    base = initial_entries(cfg)
    results = []
    for workers in (1, 4):
        store = StateStore(base)
        r = mine_block(block, store, workers=workers)
        results.append((r.order, dict(r.tdg.edges), store.digest()))
    assert results[0] == results[1]


def test_partial_commit_ratio():
    cfg = WorkloadConfig(tx_count=40, n_accounts=4, skew=1.0, seed=2)
    block = gen_block(cfg)
    store = StateStore(initial_entries(cfg))
    result = mine_block(block, store, rho=0.5)
    assert 20 <= result.metrics.committed <= 40
    assert len(result.order) == result.metrics.committed
    assert len(set(result.order)) == len(result.order)


def test_invalid_rho():
    store = StateStore()
    with pytest.raises(ValueError):
        mine_block(BIDS, store, rho=0.0)
    with pytest.raises(ValueError):
        mine_block(BIDS, store, rho=1.5)


def test_round_recording():
    result = mine_block(BIDS, StateStore(), record_rounds=True)
    detail = result.metrics.rounds_detail
    assert detail is not None and len(detail) == 2
    assert detail[0].conflict_graph.edges == {(1, 2), (2, 1), (3, 1), (3, 2)}
    assert len(detail[0].abort_set) == 1
    assert detail[1].abort_set == set()
