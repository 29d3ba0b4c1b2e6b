"""Workload generation and banking-procedure semantics."""

from random import Random

import pytest

from conftest import serial_execute
from twophase import Key, SmallBankTx, TxKind, WorkloadConfig, gen_block
from twophase.workload import (
    CHECKING,
    SAVINGS,
    initial_entries,
    smallbank_program,
    zipf_head_mass,
    zipf_sample,
)


def chk(i):
    return Key(CHECKING, i)


def sav(i):
    return Key(SAVINGS, i)


# -- procedure semantics, hand-computed ----------------------------------


def test_amalgamate_moves_everything():
    state = serial_execute(
        [SmallBankTx(0, TxKind.AMALGAMATE, (1, 2))],
        {sav(1): 30, chk(1): 12, chk(2): 5},
    )
    assert state == {sav(1): 0, chk(1): 0, chk(2): 47}


def test_write_check_sufficient_funds():
    state = serial_execute(
        [SmallBankTx(0, TxKind.WRITE_CHECK, (1,), amount=40)],
        {sav(1): 30, chk(1): 20},
    )
    assert state[chk(1)] == -20  # covered by combined balance, no penalty


def test_write_check_overdraft_penalty():
    state = serial_execute(
        [SmallBankTx(0, TxKind.WRITE_CHECK, (1,), amount=60)],
        {sav(1): 30, chk(1): 20},
    )
    assert state[chk(1)] == 20 - 60 - 1


def test_deposit_checking():
    state = serial_execute(
        [SmallBankTx(0, TxKind.DEPOSIT_CHECKING, (7,), amount=9)], {}
    )
    assert state == {chk(7): 9}  # absent balance reads as 0


def test_transact_saving_rejects_overdraft():
    ok = serial_execute(
        [SmallBankTx(0, TxKind.TRANSACT_SAVING, (1,), amount=-10)], {sav(1): 10}
    )
    assert ok[sav(1)] == 0
    rejected = serial_execute(
        [SmallBankTx(0, TxKind.TRANSACT_SAVING, (1,), amount=-11)], {sav(1): 10}
    )
    assert rejected[sav(1)] == 10


def test_send_payment_conditional_transfer():
    moved = serial_execute(
        [SmallBankTx(0, TxKind.SEND_PAYMENT, (1, 2), amount=10)],
        {chk(1): 10, chk(2): 1},
    )
    assert (moved[chk(1)], moved[chk(2)]) == (0, 11)
    refused = serial_execute(
        [SmallBankTx(0, TxKind.SEND_PAYMENT, (1, 2), amount=11)],
        {chk(1): 10, chk(2): 1},
    )
    assert (refused[chk(1)], refused[chk(2)]) == (10, 1)


def test_transfers_conserve_money():
    cfg = WorkloadConfig(tx_count=200, n_accounts=10, skew=0.9, seed=3)
    base = initial_entries(cfg)
    transfers = [
        tx
        for tx in gen_block(cfg)
        if tx.kind in (TxKind.SEND_PAYMENT, TxKind.AMALGAMATE)
    ]
    final = serial_execute(transfers, base)
    assert sum(final.values()) == sum(base.values())


# -- zipf sampling --------------------------------------------------------


def test_zipf_uniform_at_zero_skew():
    rng = Random(0)
    n, draws = 10, 20_000
    counts = [0] * n
    for _ in range(draws):
        counts[zipf_sample(n, 0.0, rng)] += 1
    for c in counts:
        assert abs(c / draws - 1 / n) < 0.02


@pytest.mark.parametrize("skew", [0.5, 0.9, 1.2])
def test_zipf_head_mass_matches_oracle(skew):
    rng = Random(42)
    n, draws, top = 50, 30_000, 5
    hits = sum(zipf_sample(n, skew, rng) < top for _ in range(draws))
    assert abs(hits / draws - zipf_head_mass(n, skew, top)) < 0.02


def test_zipf_corner_cases():
    assert zipf_sample(1, 2.0, Random(0)) == 0
    with pytest.raises(ValueError):
        zipf_sample(0, 1.0, Random(0))
    assert zipf_head_mass(10, 0.0, 3) == pytest.approx(0.3)
    samples = {zipf_sample(6, 0.8, Random(s)) for s in range(200)}
    assert samples <= set(range(6))


# -- block generation ------------------------------------------------------


def test_gen_block_is_deterministic():
    cfg = WorkloadConfig(tx_count=50, n_accounts=20, skew=0.5, seed=11)
    assert gen_block(cfg) == gen_block(cfg)
    assert gen_block(cfg) != gen_block(
        WorkloadConfig(tx_count=50, n_accounts=20, skew=0.5, seed=12)
    )


def test_gen_block_shape():
    cfg = WorkloadConfig(tx_count=300, n_accounts=15, skew=0.7, seed=1)
    block = gen_block(cfg)
    assert [tx.tx_id for tx in block] == list(range(300))
    for tx in block:
        assert 1 <= tx.amount <= 99
        assert all(0 <= a < 15 for a in tx.accounts)
        if tx.kind in (TxKind.AMALGAMATE, TxKind.SEND_PAYMENT):
            assert len(tx.accounts) == 2 and tx.accounts[0] != tx.accounts[1]
        else:
            assert len(tx.accounts) == 1
    kinds = {tx.kind for tx in block}
    assert kinds == set(TxKind)


def test_gen_block_skew_concentrates_accounts():
    def head_share(skew):
        cfg = WorkloadConfig(tx_count=2000, n_accounts=100, skew=skew, seed=5)
        hits = sum(
            a < 5 for tx in gen_block(cfg) for a in tx.accounts
        )
        total = sum(len(tx.accounts) for tx in gen_block(cfg))
        return hits / total

    assert head_share(0.9) > head_share(0.1) + 0.1


def test_initial_entries_covers_both_tables():
    cfg = WorkloadConfig(tx_count=1, n_accounts=4, initial_balance=7)
    entries = initial_entries(cfg)
    assert len(entries) == 8
    assert all(v == 7 for v in entries.values())


# -- config ----------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        WorkloadConfig(tx_count=0)
    with pytest.raises(ValueError):
        WorkloadConfig(n_accounts=0)
    with pytest.raises(ValueError):
        WorkloadConfig(skew=-0.1)


def test_config_from_file(tmp_path):
    path = tmp_path / "wl.cfg"
    path.write_text(
        "# workload\ntx_count = 12\nskew = 0.7  # heavy\nn_accounts=9\n\n"
    )
    cfg = WorkloadConfig.from_file(path)
    assert (cfg.tx_count, cfg.n_accounts, cfg.skew) == (12, 9, 0.7)
    assert cfg.seed == 0  # untouched fields keep defaults

    bad = tmp_path / "bad.cfg"
    bad.write_text("accounts = 3\n")
    with pytest.raises(ValueError, match="unknown config key"):
        WorkloadConfig.from_file(bad)


def test_smallbank_program_arity():
    with pytest.raises(ValueError):
        smallbank_program(0, TxKind.AMALGAMATE, (1,))
    with pytest.raises(ValueError):
        smallbank_program(0, TxKind.DEPOSIT_CHECKING, (1, 2), 5)
    tx = smallbank_program(3, TxKind.SEND_PAYMENT, [4, 5], 6)
    assert tx == SmallBankTx(3, TxKind.SEND_PAYMENT, (4, 5), 6)
