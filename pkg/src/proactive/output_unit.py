"""Delivery: condense a draft into one actionable sentence and hand it to a sink."""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Protocol

from .backends import ModelBackend, complete
from .errors import EmptyCondensation, SinkFailure
from .prompts import PromptPack, fmt_t

if TYPE_CHECKING:
    from .cpu import DraftResponse


class _LooseEnum(str, Enum):
    @classmethod
    def _missing_(cls, value):
        for member in cls:
            if isinstance(value, str) and member.value.lower() == value.lower():
                return member
        return None


class Verbosity(_LooseEnum):
    BRIEF = "Brief"
    FULL = "Full"
    SILENT = "Silent"


@dataclass(frozen=True)
class ActionInstruction:
    text: str
    verbosity: Verbosity

    def __post_init__(self) -> None:
        if self.verbosity is Verbosity.SILENT and self.text:
            raise ValueError("silent instructions carry no text")
        if self.verbosity is Verbosity.BRIEF and not is_single_sentence(self.text):
            raise ValueError(f"brief instruction is not one sentence: {self.text!r}")


@dataclass(frozen=True)
class DeliveryReceipt:
    sink_id: str
    t_start: float
    t_end: float
    interrupted: bool = False
    emitted_chars: int = 0


_FIRST_SENTENCE = re.compile(r"^(.*?[.!?])(?=\s|$)", re.DOTALL)
_BOUNDARY = re.compile(r"[.!?](?=\s|$)")


def first_sentence(text: str) -> str:
    """First sentence of ``text``: up to the first ``.``/``!``/``?`` followed by whitespace or the end.

    Whitespace runs (line breaks included) collapse to single spaces. Text with
    no terminal punctuation is returned whole with a period appended.
    """
    flat = " ".join(text.split())
    if not flat:
        return ""
    m = _FIRST_SENTENCE.match(flat)
    return m.group(1) if m else flat + "."


def is_single_sentence(text: str) -> bool:
    if not text or "\n" in text or text != text.strip():
        return False
    bounds = list(_BOUNDARY.finditer(text))
    return len(bounds) == 1 and bounds[0].end() == len(text)


def condense(
    draft: "DraftResponse",
    backend: ModelBackend,
    verbosity: Verbosity = Verbosity.BRIEF,
    prompts: PromptPack | None = None,
) -> ActionInstruction:
    verbosity = Verbosity(verbosity)
    if verbosity is Verbosity.SILENT:
        return ActionInstruction("", Verbosity.SILENT)
    if not draft.text.strip():
        raise EmptyCondensation("draft is empty")
    if verbosity is Verbosity.FULL:
        return ActionInstruction(draft.text, Verbosity.FULL)
    prompts = prompts or PromptPack.default()
    reply = complete(backend, prompts.render("output.condense", content=draft.text)).text
    sentence = first_sentence(reply)
    if not sentence:
        raise EmptyCondensation("condensation produced no text")
    return ActionInstruction(sentence, Verbosity.BRIEF)


# ----------------------------------------------------------------------- sinks


class SinkKind(_LooseEnum):
    TEXT_LOG = "TextLog"
    MODELED_SPEECH = "ModeledSpeech"


class DeliverySink(Protocol):
    sink_id: str

    def emit(self, t: float, text: str) -> None: ...


class TextLogSink:
    """Keeps ``[t] text`` lines in memory and, optionally, appends them to a file."""

    def __init__(self, path: str | Path | None = None, rate: float = 20.0, sink_id: str = "text") -> None:
        self.sink_id = sink_id
        self.path = Path(path) if path is not None else None
        self.rate = rate
        self.lines: list[str] = []
        self.receipts: list[DeliveryReceipt] = []
        self.active: DeliveryReceipt | None = None
        self._lock = threading.Lock()

    def emit(self, t: float, text: str) -> None:
        # one line per delivery, whatever the text's own line breaks
        line = f"[{fmt_t(t)}] {' '.join(text.split())}"
        if self.path is not None:
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
            except OSError as exc:
                raise SinkFailure(str(exc)) from exc
        self.lines.append(line)


class ModeledSpeechSink(TextLogSink):
    """Stands in for a speech engine: text is logged and playback time is modeled as chars/rate."""

    def __init__(self, rate: float = 20.0, path: str | Path | None = None, sink_id: str = "speech") -> None:
        super().__init__(path=path, rate=rate, sink_id=sink_id)


def make_sink(kind: SinkKind | str, rate: float = 20.0, path: str | Path | None = None) -> TextLogSink:
    kind = SinkKind(kind)
    if kind is SinkKind.TEXT_LOG:
        return TextLogSink(path=path, rate=rate)
    return ModeledSpeechSink(rate=rate, path=path)


def _lock_of(sink) -> threading.Lock:
    lock = getattr(sink, "_lock", None)
    if lock is None:
        lock = threading.Lock()
        sink._lock = lock
    return lock


def _settle(sink, now: float) -> None:
    active = getattr(sink, "active", None)
    if active is not None and now >= active.t_end:
        sink.active = None


def advance(sink, now: float) -> None:
    """Let modeled time pass: a delivery whose end time has been reached is complete."""
    with _lock_of(sink):
        _settle(sink, now)


def deliver(sink, instruction: ActionInstruction, t: float) -> DeliveryReceipt:
    rate = getattr(sink, "rate", 20.0)
    with _lock_of(sink):
        _settle(sink, t)
        receipts = getattr(sink, "receipts", None)
        if receipts is None:
            receipts = sink.receipts = []
        if instruction.verbosity is Verbosity.SILENT or not instruction.text:
            receipt = DeliveryReceipt(sink.sink_id, t, t)
            receipts.append(receipt)
            return receipt
        # deliveries queue behind whatever is still playing
        active = getattr(sink, "active", None)
        start = max(t, active.t_end) if active is not None else t
        try:
            sink.emit(t, instruction.text)
        except SinkFailure:
            raise
        except Exception as exc:  # noqa: BLE001 - any sink error is a delivery failure
            raise SinkFailure(f"{sink.sink_id}: {exc}") from exc
        n = len(instruction.text)
        receipt = DeliveryReceipt(sink.sink_id, start, start + n / rate, False, n)
        receipts.append(receipt)
        sink.active = receipt
        return receipt


def _cut(sink, at: float) -> None:
    active = sink.active
    at = min(max(at, active.t_start), active.t_end)
    rate = getattr(sink, "rate", 20.0)
    emitted = min(active.emitted_chars, int((at - active.t_start) * rate))
    cut = replace(active, t_end=at, interrupted=True, emitted_chars=emitted)
    receipts = sink.receipts
    for i in range(len(receipts) - 1, -1, -1):
        if receipts[i] is active:
            receipts[i] = cut
            break
    sink.active = None


def interrupt(sink, at: float | None = None) -> bool:
    """Stop the delivery in progress; returns whether there was one.

    ``at`` is the modeled time of the interruption (defaults to the delivery's start).
    A delivery whose modeled end is at or before ``at`` has already finished.
    """
    with _lock_of(sink):
        active = getattr(sink, "active", None)
        if active is None:
            return False
        if at is not None and at >= active.t_end:
            sink.active = None
            return False
        _cut(sink, active.t_start if at is None else at)
        return True


def last_receipt(sink) -> DeliveryReceipt | None:
    receipts = getattr(sink, "receipts", None)
    return receipts[-1] if receipts else None
