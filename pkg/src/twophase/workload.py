"""SmallBank+ workload generation: five banking procedures over checking and
savings tables, with Zipfian-skewed account selection.

Procedure semantics follow the common OLTP formulation.  Missing balances
read as 0.  SendPayment is a two-account checking transfer (our extension):
it reads both checking rows and, when the sender can cover the amount,
writes both.
"""

from __future__ import annotations

import enum
from bisect import bisect_right
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from random import Random
from typing import Protocol, Sequence, Union

from .state import Key

CHECKING = "checking"
SAVINGS = "savings"


class TxKind(enum.IntEnum):
    AMALGAMATE = 0
    WRITE_CHECK = 1
    DEPOSIT_CHECKING = 2
    TRANSACT_SAVING = 3
    SEND_PAYMENT = 4


# Number of account parameters per kind (the remaining parameter, if any,
# is an amount).
_TWO_ACCOUNT_KINDS = {TxKind.AMALGAMATE, TxKind.SEND_PAYMENT}


class TxContext(Protocol):
    """Read/write interface a transaction program executes against."""

    def read(self, key: Key) -> int: ...

    def write(self, key: Key, value: int) -> None: ...


class TxProgram(Protocol):
    tx_id: int

    def run(self, ctx: TxContext) -> None: ...


@dataclass(frozen=True)
class SmallBankTx:
    """One deterministic SmallBank+ invocation.

    Executing the same program against the same visible state always yields
    identical read and write sets; every kind performs at most 6 reads and
    4 writes.
    """

    tx_id: int
    kind: TxKind
    accounts: tuple[int, ...]
    amount: int = 0

    def run(self, ctx: TxContext) -> None:
        kind = self.kind
        if kind == TxKind.AMALGAMATE:
            a, b = self.accounts
            sav_a = ctx.read(Key(SAVINGS, a))
            chk_a = ctx.read(Key(CHECKING, a))
            chk_b = ctx.read(Key(CHECKING, b))
            ctx.write(Key(SAVINGS, a), 0)
            ctx.write(Key(CHECKING, a), 0)
            ctx.write(Key(CHECKING, b), chk_b + sav_a + chk_a)
        elif kind == TxKind.WRITE_CHECK:
            (a,) = self.accounts
            sav = ctx.read(Key(SAVINGS, a))
            chk = ctx.read(Key(CHECKING, a))
            if self.amount <= sav + chk:
                ctx.write(Key(CHECKING, a), chk - self.amount)
            else:
                # overdraft penalty of 1
                ctx.write(Key(CHECKING, a), chk - self.amount - 1)
        elif kind == TxKind.DEPOSIT_CHECKING:
            (a,) = self.accounts
            chk = ctx.read(Key(CHECKING, a))
            ctx.write(Key(CHECKING, a), chk + self.amount)
        elif kind == TxKind.TRANSACT_SAVING:
            (a,) = self.accounts
            sav = ctx.read(Key(SAVINGS, a))
            if sav + self.amount >= 0:
                ctx.write(Key(SAVINGS, a), sav + self.amount)
        elif kind == TxKind.SEND_PAYMENT:
            a, b = self.accounts
            chk_a = ctx.read(Key(CHECKING, a))
            chk_b = ctx.read(Key(CHECKING, b))
            if chk_a >= self.amount:
                ctx.write(Key(CHECKING, a), chk_a - self.amount)
                ctx.write(Key(CHECKING, b), chk_b + self.amount)
        else:  # pragma: no cover
            raise ValueError(f"unknown kind {kind}")


@dataclass(frozen=True)
class WorkloadConfig:
    tx_count: int = 400
    n_accounts: int = 1000
    skew: float = 0.0
    initial_balance: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.tx_count < 1:
            raise ValueError("tx_count must be positive")
        if self.n_accounts < 1:
            raise ValueError("n_accounts must be positive")
        if self.skew < 0:
            raise ValueError("skew must be >= 0")

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "WorkloadConfig":
        """Load from a flat key=value text file; '#' starts a comment."""
        fields = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, _, value = line.partition("=")
            name = name.strip()
            if name not in cls.__dataclass_fields__:
                raise ValueError(f"unknown config key {name!r}")
            fields[name] = float(value) if name == "skew" else int(value)
        return cls(**fields)


@lru_cache(maxsize=64)
def _zipf_cdf(n: int, skew: float) -> tuple[float, ...]:
    weights = [1.0 / (k + 1) ** skew for k in range(n)]
    total = sum(weights)
    acc, cdf = 0.0, []
    for w in weights:
        acc += w / total
        cdf.append(acc)
    cdf[-1] = 1.0
    return tuple(cdf)


def zipf_sample(n: int, skew: float, rng: Random) -> int:
    """Draw an index in [0, n) with P(k) proportional to 1/(k+1)**skew.

    Inversion over a precomputed cumulative table; deterministic given the
    rng state.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 0
    return bisect_right(_zipf_cdf(n, skew), rng.random())


def zipf_head_mass(n: int, skew: float, top: int) -> float:
    """Probability mass of the `top` most popular indices (test oracle)."""
    total = sum(1.0 / (k + 1) ** skew for k in range(n))
    return sum(1.0 / (k + 1) ** skew for k in range(top)) / total


def smallbank_program(
    tx_id: int, kind: TxKind, accounts: Sequence[int], amount: int = 0
) -> SmallBankTx:
    expected = 2 if kind in _TWO_ACCOUNT_KINDS else 1
    if len(accounts) != expected:
        raise ValueError(f"{kind.name} takes {expected} account(s)")
    return SmallBankTx(tx_id, kind, tuple(accounts), amount)


def gen_block(cfg: WorkloadConfig) -> list[SmallBankTx]:
    """Generate one block of programs; a pure function of the config."""
    rng = Random(cfg.seed)
    block = []
    for i in range(cfg.tx_count):
        kind = TxKind(rng.randrange(len(TxKind)))
        a = zipf_sample(cfg.n_accounts, cfg.skew, rng)
        if kind in _TWO_ACCOUNT_KINDS:
            b = zipf_sample(cfg.n_accounts, cfg.skew, rng)
            while b == a and cfg.n_accounts > 1:
                b = zipf_sample(cfg.n_accounts, cfg.skew, rng)
            accounts: tuple[int, ...] = (a, b)
        else:
            accounts = (a,)
        amount = rng.randrange(1, 100)
        block.append(SmallBankTx(i, kind, accounts, amount))
    return block


def initial_entries(cfg: WorkloadConfig) -> dict[Key, int]:
    """Pre-block population: every account gets both balances."""
    entries = {}
    for acct in range(cfg.n_accounts):
        entries[Key(CHECKING, acct)] = cfg.initial_balance
        entries[Key(SAVINGS, acct)] = cfg.initial_balance
    return entries
