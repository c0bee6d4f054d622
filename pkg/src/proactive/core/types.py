"""Domain types shared by every unit, plus the trace wire format."""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from ..config import RunConfig
    from ..input_unit import Observation, TriggerSignal
    from ..output_unit import ActionInstruction


class EventKind(str, Enum):
    FRAME = "FrameDescription"
    SPEECH = "SpeechUtterance"
    TICK = "Tick"


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind
    payload: str = ""

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError(f"event time must be non-negative, got {self.t}")
        if not isinstance(self.kind, EventKind):
            object.__setattr__(self, "kind", EventKind(self.kind))

    def to_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind.value, "payload": self.payload}


class Unit(str, Enum):
    INPUT = "Input"
    CPU = "CPU"
    ALU = "ALU"
    MEMORY = "Memory"
    OUTPUT = "Output"


@dataclass(frozen=True)
class TraceEntry:
    t: float
    seq: int
    unit: Unit
    label: str
    body: str

    def to_json(self) -> str:
        return json.dumps(
            {"t": round(self.t, 3), "seq": self.seq, "unit": self.unit.value,
             "label": self.label, "body": self.body},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "TraceEntry":
        d = json.loads(line)
        return cls(float(d["t"]), int(d["seq"]), Unit(d["unit"]), d["label"], d["body"])


def serialize_trace(entries: Iterable[TraceEntry]) -> str:
    return "".join(e.to_json() + "\n" for e in entries)


def parse_trace(text: str) -> list[TraceEntry]:
    # only "\n" separates entries; bodies may hold other Unicode line breaks unescaped
    return [TraceEntry.from_json(line) for line in text.split("\n") if line.strip()]


@dataclass(frozen=True)
class ServiceResponse:
    t: float
    service_name: str
    full_text: str
    instruction: "ActionInstruction"
    provenance: tuple[int, ...] = ()


@dataclass(frozen=True)
class Exchange:
    """One exchange-log entry: a fired trigger with its response, or a suppression/abort reason."""

    trigger: "TriggerSignal"
    response: ServiceResponse | None = None
    reason: str | None = None


@dataclass
class StepOutcome:
    trigger: "TriggerSignal | None" = None
    response: ServiceResponse | None = None
    trace: list[TraceEntry] = field(default_factory=list)
    # every exchange fired during this step; normally at most one
    exchanges: list[Exchange] = field(default_factory=list)


@dataclass
class SessionState:
    session_id: str
    config: "RunConfig"
    now: float = 0.0
    window: deque = field(default_factory=deque)
    last_trigger_t: float | None = None
    pending_timers: list[tuple[float, str]] = field(default_factory=list)
    exchange_log: list[Exchange] = field(default_factory=list)
    trace: list[TraceEntry] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.window = deque(self.window, maxlen=self.config.window_len)

    def record(self, unit: Unit, label: str, body: str) -> TraceEntry:
        entry = TraceEntry(self.now, len(self.trace), unit, label, body)
        self.trace.append(entry)
        return entry


@dataclass
class SessionTrace:
    """Result of :func:`run_session`: the full trace plus the final session state."""

    entries: list[TraceEntry]
    session: SessionState | None = None

    def serialize(self) -> str:
        return serialize_trace(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def find(self, label: str, unit: Unit | None = None) -> list[TraceEntry]:
        return [e for e in self.entries if e.label == label and (unit is None or e.unit is unit)]

    @property
    def trigger_times(self) -> list[float]:
        return [e.t for e in self.find("trigger", Unit.INPUT)]

    @property
    def services(self) -> list[str]:
        return [e.body for e in self.find("proposal", Unit.CPU)]
