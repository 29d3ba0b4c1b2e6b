"""Two-phase concurrent transaction execution: a batching optimistic miner
that emits a partitioned dependency-graph schedule log, and a deterministic
multi-threaded validator that replays it and detects tampering."""

from .graphs import ConflictGraph, choose_vertex, find_abort_set, find_sccs, prune
from .miner import TxRecord, build_conflict_graph, execute_read_phase, mine_block
from .schedlog import (
    DecodeError,
    ScheduleLog,
    UnsupportedVersion,
    build_schedule_log,
    decode_schedule_log,
    encode_schedule_log,
)
from .state import Key, StateStore
from .tdg import (
    DependencyGraph,
    Partition,
    communication_cost,
    parallelism,
    partition,
    partition_weighted,
    singleton_partition,
)
from .validator import (
    PreStateMismatch,
    ReplayReport,
    Verdict,
    makespan_bounds,
    replay_block,
    simulate_makespan,
)
from .workload import (
    SmallBankTx,
    TxKind,
    WorkloadConfig,
    gen_block,
    initial_entries,
    smallbank_program,
    zipf_sample,
)

__all__ = [
    "ConflictGraph",
    "DecodeError",
    "DependencyGraph",
    "Key",
    "Partition",
    "PreStateMismatch",
    "ReplayReport",
    "ScheduleLog",
    "SmallBankTx",
    "StateStore",
    "TxKind",
    "TxRecord",
    "UnsupportedVersion",
    "Verdict",
    "WorkloadConfig",
    "build_conflict_graph",
    "build_schedule_log",
    "choose_vertex",
    "communication_cost",
    "decode_schedule_log",
    "encode_schedule_log",
    "execute_read_phase",
    "find_abort_set",
    "find_sccs",
    "gen_block",
    "initial_entries",
    "makespan_bounds",
    "mine_block",
    "parallelism",
    "partition",
    "partition_weighted",
    "prune",
    "replay_block",
    "simulate_makespan",
    "singleton_partition",
    "smallbank_program",
    "zipf_sample",
]
