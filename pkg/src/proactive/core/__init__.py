"""Shared domain types. The machine loop lives in :mod:`proactive.core.machine`."""

from .types import (
    Event,
    EventKind,
    Exchange,
    ServiceResponse,
    SessionState,
    SessionTrace,
    StepOutcome,
    TraceEntry,
    Unit,
    parse_trace,
    serialize_trace,
)

__all__ = [
    "Event",
    "EventKind",
    "Exchange",
    "ServiceResponse",
    "SessionState",
    "SessionTrace",
    "StepOutcome",
    "TraceEntry",
    "Unit",
    "parse_trace",
    "serialize_trace",
]
