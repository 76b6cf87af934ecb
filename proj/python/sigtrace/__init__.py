"""Reactive signals with persistent histories, semantic actions and replication."""

from ._core import (
    ActionBlock,
    ActionId,
    BranchId,
    CheckpointId,
    ExplorationPath,
    HistoryEntry,
    PathId,
    Replica,
    SigtraceError,
    SignalDiff,
    TxnId,
    VersionStamp,
    demo_session,
    replay,
    simulate,
    verify,
)

__all__ = [
    "ActionBlock",
    "ActionId",
    "BranchId",
    "CheckpointId",
    "ExplorationPath",
    "HistoryEntry",
    "PathId",
    "Replica",
    "SigtraceError",
    "SignalDiff",
    "TxnId",
    "VersionStamp",
    "demo_session",
    "replay",
    "simulate",
    "verify",
]
