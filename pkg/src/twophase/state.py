"""Shared key/value state with atomic write-set application and a canonical digest.

Keys are (namespace, id) pairs with a total order; values are signed 64-bit
integers (money in cents).  The canonical entry serialization (namespace
length byte, namespace bytes, id as 8-byte big-endian, amount as 8-byte
big-endian two's complement) is shared by the digest and by read-set byte
accounting, so both are platform independent.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from typing import Iterator, Mapping, NamedTuple, Optional


class Key(NamedTuple):
    namespace: str
    id: int

    def render(self) -> str:
        return f"{self.namespace}/{self.id}"


# Identifier recorded in schedule-log headers so miner and validators agree
# on the digest function.
DIGEST_ALGO_SHA256 = 1

_ID_STRUCT = struct.Struct(">Q")
_VALUE_STRUCT = struct.Struct(">q")


def encode_key(key: Key) -> bytes:
    ns = key.namespace.encode("ascii")
    if len(ns) > 255:
        raise ValueError(f"namespace too long: {key.namespace!r}")
    return bytes([len(ns)]) + ns + _ID_STRUCT.pack(key.id)


def decode_key(buf: bytes, offset: int) -> tuple[Key, int]:
    ns_len = buf[offset]
    offset += 1
    ns = buf[offset : offset + ns_len].decode("ascii")
    offset += ns_len
    (ident,) = _ID_STRUCT.unpack_from(buf, offset)
    return Key(ns, ident), offset + 8


def encode_entry(key: Key, value: int) -> bytes:
    return encode_key(key) + _VALUE_STRUCT.pack(value)


def decode_entry(buf: bytes, offset: int) -> tuple[Key, int, int]:
    key, offset = decode_key(buf, offset)
    (value,) = _VALUE_STRUCT.unpack_from(buf, offset)
    return key, value, offset + 8


def encode_entries(entries: Mapping[Key, int]) -> bytes:
    """Canonical serialization: entries in sorted key order."""
    return b"".join(encode_entry(k, entries[k]) for k in sorted(entries))


def entry_bytes(entries: Mapping[Key, int]) -> int:
    """Serialized byte length of an entry map (edge-weight accounting)."""
    return sum(17 + len(k.namespace) for k in entries)


def entries_digest(entries: Mapping[Key, int]) -> bytes:
    return hashlib.sha256(encode_entries(entries)).digest()


# sha256 of the empty byte string; the digest of a store with no entries.
EMPTY_DIGEST = hashlib.sha256(b"").digest()


class StateStore:
    """Committed key->value state shared by miner and validator threads.

    Readers are lock-free: the entry map is swapped wholesale on every
    mutation (copy-on-write), so a snapshot is always internally consistent
    and a reader never observes a half-applied write set.  Writers are
    serialized by an internal lock; commit *order* is arbitrated by the
    caller, not the store.
    """

    def __init__(self, entries: Optional[Mapping[Key, int]] = None):
        self._entries: dict[Key, int] = dict(entries) if entries else {}
        self._write_lock = threading.Lock()
        self.commit_counter = 0

    def get(self, key: Key) -> Optional[int]:
        return self._entries.get(key)

    def snapshot(self) -> Mapping[Key, int]:
        """Immutable-by-convention view of the current entry map."""
        return self._entries

    def apply_write_set(self, ws: Mapping[Key, int]) -> None:
        with self._write_lock:
            updated = dict(self._entries)
            updated.update(ws)
            self._entries = updated
            self.commit_counter += 1

    def set(self, key: Key, value: int) -> None:
        """Single-key in-place update (fast-mode direct writes)."""
        with self._write_lock:
            updated = dict(self._entries)
            updated[key] = value
            self._entries = updated

    def restore(self, entries: Mapping[Key, int]) -> None:
        """Discard current state, reverting to a previously taken snapshot."""
        with self._write_lock:
            self._entries = dict(entries)

    def digest(self) -> bytes:
        return entries_digest(self._entries)

    def copy(self) -> "StateStore":
        return StateStore(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Key]:
        return iter(self._entries)
