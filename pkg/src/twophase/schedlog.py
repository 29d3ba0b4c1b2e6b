"""Wire format for the miner-to-validator schedule log.

Canonical big-endian binary layout, one checksummed section per concern:

    header : magic "SLOG", version u16, digest algo u8, flags u8,
             pre-state digest (32 bytes), crc32
    TXNS   : transactions in serialization order; index = sequence number
    PART   : partition assignment (vertex ids per part)
    CUTE   : cut-edge table, (u, v) -> consistent read-set entries
    INTR   : intra-partition edges, keys only (values are re-derived by
             executing the predecessor inside the same part)

Every byte is covered by a crc32, so transport corruption is always
distinguishable from semantic tampering: a flipped byte fails decoding
instead of yielding a silently different log.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .state import Key, decode_entry, decode_key, encode_entry, encode_key
from .tdg import DependencyGraph, Partition
from .workload import SmallBankTx, TxKind

MAGIC = b"SLOG"
FORMAT_VERSION = 1

_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_I64 = struct.Struct(">q")
_U64 = struct.Struct(">Q")


class DecodeError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnsupportedVersion(DecodeError):
    pass


@dataclass(frozen=True)
class LogTx:
    tx_id: int
    program: SmallBankTx
    omega: int


@dataclass
class ScheduleLog:
    pre_digest: bytes
    txs: list[LogTx]  # serialization order; list index is the sequence number
    parts: list[list[int]]
    cut_edges: dict[tuple[int, int], dict[Key, int]]
    intra_edges: dict[tuple[int, int], tuple[Key, ...]] = field(
        default_factory=dict
    )
    version: int = FORMAT_VERSION
    digest_algo: int = 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScheduleLog):
            return NotImplemented
        return (
            self.pre_digest == other.pre_digest
            and self.txs == other.txs
            and self.parts == other.parts
            and self.cut_edges == other.cut_edges
            and {e: tuple(ks) for e, ks in self.intra_edges.items()}
            == {e: tuple(ks) for e, ks in other.intra_edges.items()}
            and self.version == other.version
            and self.digest_algo == other.digest_algo
        )


def build_schedule_log(
    tdg: DependencyGraph,
    order: Sequence[int],
    partition: Partition,
    pre_digest: bytes,
) -> ScheduleLog:
    """Split the dependency graph along the partition: cut edges ship their
    consistent read-set values, intra-partition edges ship keys only."""
    seq_of = {tx_id: i for i, tx_id in enumerate(order)}
    txs = [LogTx(t, tdg.programs[t], tdg.omega[t]) for t in order]
    parts = [sorted(part, key=seq_of.__getitem__) for part in partition.parts]
    cut: dict[tuple[int, int], dict[Key, int]] = {}
    intra: dict[tuple[int, int], tuple[Key, ...]] = {}
    for (u, v), read_set in tdg.edges.items():
        if partition.part_of[u] != partition.part_of[v]:
            cut[(u, v)] = dict(read_set)
        else:
            intra[(u, v)] = tuple(sorted(read_set))
    return ScheduleLog(pre_digest, txs, parts, cut, intra)


def _encode_program(tx: SmallBankTx) -> bytes:
    out = [bytes([int(tx.kind), len(tx.accounts)])]
    out.extend(_U64.pack(a) for a in tx.accounts)
    out.append(_I64.pack(tx.amount))
    return b"".join(out)


def _section(tag: bytes, payload: bytes) -> bytes:
    body = tag + _U32.pack(len(payload)) + payload
    return body + _U32.pack(zlib.crc32(body))


def encode_schedule_log(log: ScheduleLog) -> bytes:
    header = (
        MAGIC
        + _U16.pack(log.version)
        + bytes([log.digest_algo, 0])
        + log.pre_digest
    )
    header += _U32.pack(zlib.crc32(header))

    txns = [_U32.pack(len(log.txs))]
    for entry in log.txs:
        if not isinstance(entry.program, SmallBankTx):
            raise TypeError(
                "only SmallBank programs have a wire encoding; got "
                f"{type(entry.program).__name__}"
            )
        txns.append(_U32.pack(entry.tx_id) + _U32.pack(entry.omega))
        txns.append(_encode_program(entry.program))

    part = [_U32.pack(len(log.parts))]
    for vertices in log.parts:
        part.append(_U32.pack(len(vertices)))
        part.extend(_U32.pack(v) for v in vertices)

    cute = [_U32.pack(len(log.cut_edges))]
    for (u, v) in sorted(log.cut_edges):
        read_set = log.cut_edges[(u, v)]
        cute.append(_U32.pack(u) + _U32.pack(v) + _U32.pack(len(read_set)))
        cute.extend(encode_entry(k, read_set[k]) for k in sorted(read_set))

    intr = [_U32.pack(len(log.intra_edges))]
    for (u, v) in sorted(log.intra_edges):
        keys = log.intra_edges[(u, v)]
        intr.append(_U32.pack(u) + _U32.pack(v) + _U32.pack(len(keys)))
        intr.extend(encode_key(k) for k in sorted(keys))

    return b"".join(
        [
            header,
            _section(b"TXNS", b"".join(txns)),
            _section(b"PART", b"".join(part)),
            _section(b"CUTE", b"".join(cute)),
            _section(b"INTR", b"".join(intr)),
        ]
    )


class _Reader:
    def __init__(self, buf: bytes, offset: int = 0, base: int = 0):
        self.buf = buf
        self.offset = offset
        self.base = base  # absolute position of buf[0], for error reporting

    def _take(self, n: int) -> bytes:
        if self.offset + n > len(self.buf):
            raise DecodeError("truncated input", self.base + len(self.buf))
        chunk = self.buf[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return _U16.unpack(self._take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self._take(8))[0]

    def i64(self) -> int:
        return _I64.unpack(self._take(8))[0]

    def key(self) -> Key:
        try:
            key, self.offset = decode_key(self.buf, self.offset)
        except (IndexError, UnicodeDecodeError, struct.error):
            raise DecodeError("bad key encoding", self.base + self.offset)
        return key

    def entry(self) -> tuple[Key, int]:
        try:
            key, value, self.offset = decode_entry(self.buf, self.offset)
        except (IndexError, UnicodeDecodeError, struct.error):
            raise DecodeError("bad entry encoding", self.base + self.offset)
        return key, value


def _read_section(outer: _Reader, tag: bytes) -> _Reader:
    start = outer.offset
    got = outer._take(4)
    if got != tag:
        raise DecodeError(f"expected section {tag!r}, got {got!r}", start)
    length = outer.u32()
    payload = outer._take(length)
    crc = outer.u32()
    if zlib.crc32(outer.buf[start : start + 8 + length]) != crc:
        raise DecodeError(f"checksum mismatch in section {tag!r}", start)
    return _Reader(payload, base=start + 8)


def decode_schedule_log(buf: bytes) -> ScheduleLog:
    r = _Reader(buf)
    if r._take(4) != MAGIC:
        raise DecodeError("bad magic", 0)
    version = r.u16()
    algo = r.u8()
    flags = r.u8()
    pre_digest = r._take(32)
    crc = r.u32()
    if zlib.crc32(buf[:40]) != crc:
        raise DecodeError("header checksum mismatch", 0)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported version {version}", 4)
    if flags != 0:
        raise DecodeError(f"unknown flags {flags:#x}", 7)

    s = _read_section(r, b"TXNS")
    txs = []
    for _ in range(s.u32()):
        tx_id, omega = s.u32(), s.u32()
        kind_raw = s.u8()
        try:
            kind = TxKind(kind_raw)
        except ValueError:
            raise DecodeError(
                f"unknown transaction kind {kind_raw}", s.base + s.offset - 1
            )
        accounts = tuple(s.u64() for _ in range(s.u8()))
        amount = s.i64()
        try:
            program = SmallBankTx(tx_id, kind, accounts, amount)
        except (TypeError, ValueError) as exc:
            raise DecodeError(str(exc), s.base + s.offset)
        txs.append(LogTx(tx_id, program, omega))

    s = _read_section(r, b"PART")
    parts = [[s.u32() for _ in range(s.u32())] for _ in range(s.u32())]

    s = _read_section(r, b"CUTE")
    cut: dict[tuple[int, int], dict[Key, int]] = {}
    for _ in range(s.u32()):
        u, v, count = s.u32(), s.u32(), s.u32()
        cut[(u, v)] = dict(s.entry() for _ in range(count))

    s = _read_section(r, b"INTR")
    intra: dict[tuple[int, int], tuple[Key, ...]] = {}
    for _ in range(s.u32()):
        u, v, count = s.u32(), s.u32(), s.u32()
        intra[(u, v)] = tuple(s.key() for _ in range(count))

    if r.offset != len(buf):
        raise DecodeError("trailing bytes after final section", r.offset)

    log = ScheduleLog(pre_digest, txs, parts, cut, intra, version, algo)
    _check_consistency(log, len(buf))
    return log


def _check_consistency(log: ScheduleLog, size: int) -> None:
    ids = [t.tx_id for t in log.txs]
    if len(set(ids)) != len(ids):
        raise DecodeError("duplicate transaction ids", size)
    id_set = set(ids)
    covered = [v for part in log.parts for v in part]
    if sorted(covered) != sorted(ids):
        raise DecodeError("partition does not cover the transactions", size)
    for u, v in list(log.cut_edges) + list(log.intra_edges):
        if u not in id_set or v not in id_set:
            raise DecodeError(f"edge ({u}, {v}) references unknown tx", size)
