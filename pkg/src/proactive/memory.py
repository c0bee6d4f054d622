"""Long-term episodic memory backed by a line-delimited JSON file.

Writes are queued and become visible to :func:`retrieve` only after
:func:`flush`, which rewrites the file through a temp-file rename.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable

from .backends import ModelBackend, complete
from .errors import DuplicateId, DuplicateTimestamp, PersistenceFailure
from .prompts import PromptPack, fmt_t

RECORD_KEYS = ("record_id", "user_id", "user_role", "summary", "final_output", "timestamp", "topic")
ISO_FORMAT = "%Y-%m-%dT%H:%M:%SZ"
_RECORD_NS = uuid.UUID("6f1b7c2e-4a53-4f0e-9d38-2b51c0a7e911")
_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class MemoryRecord:
    record_id: str
    user_id: str
    user_role: str
    summary: str
    final_output: str
    timestamp: str
    topic: str

    def __post_init__(self) -> None:
        if not self.summary or not self.topic:
            raise ValueError("memory records need a summary and a topic")

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k) for k in RECORD_KEYS}, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "MemoryRecord":
        d = json.loads(line)
        return cls(**{k: d[k] for k in RECORD_KEYS})


@dataclass(frozen=True)
class MemoryQuery:
    topic_terms: tuple[str, ...]
    k: int = 3

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("k must be >= 0")
        object.__setattr__(self, "topic_terms", tuple(t.lower() for t in self.topic_terms))

    @classmethod
    def from_text(cls, text: str, k: int = 3) -> "MemoryQuery":
        return cls(tuple(tokenize(text)), k)


def timestamp_key(ts: str) -> tuple[str, int]:
    """Sort key honouring the ``-n`` collision suffix (``...Z-10`` sorts after ``...Z-2``)."""
    base, sep, n = ts.rpartition("Z-")
    if sep and n.isdigit():
        return base + "Z", int(n)
    return ts, 0


@dataclass
class StoreHandle:
    path: Path | None
    index: list[MemoryRecord] = field(default_factory=list)
    pending: list[MemoryRecord] = field(default_factory=list)
    _tokens: list[frozenset[str]] = field(default_factory=list, repr=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    @classmethod
    def open(cls, path: str | Path | None) -> "StoreHandle":
        """Load an existing store, or start an empty one. ``None`` keeps everything in memory."""
        store = cls(Path(path) if path is not None else None)
        if store.path is not None and store.path.exists():
            with open(store.path, encoding="utf-8") as fh:
                records = [MemoryRecord.from_json(line) for line in fh if line.strip()]
            store._extend_index(records)
        return store

    def _extend_index(self, records: Iterable[MemoryRecord]) -> None:
        for r in records:
            self.index.append(r)
            self._tokens.append(frozenset(tokenize(r.topic)) | frozenset(tokenize(r.summary)))

    def timestamps(self) -> set[str]:
        with self._lock:
            return {r.timestamp for r in self.index} | {r.timestamp for r in self.pending}

    def __len__(self) -> int:
        return len(self.index)


# --------------------------------------------------------------------- clocks


class ScenarioClock:
    """Maps scenario-relative seconds onto an absolute UTC origin, truncated to whole seconds."""

    def __init__(self, origin: str = "2025-01-01T00:00:00Z") -> None:
        self.origin = datetime.strptime(origin, ISO_FORMAT).replace(tzinfo=timezone.utc)

    def at(self, t: float) -> str:
        return (self.origin + timedelta(seconds=int(t))).strftime(ISO_FORMAT)


def wall_clock() -> str:
    return datetime.now(timezone.utc).strftime(ISO_FORMAT)


def unique_timestamp(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    n = 1
    while f"{base}-{n}" in taken:
        n += 1
    return f"{base}-{n}"


# ----------------------------------------------------------------- operations


def _labeled(text: str, label: str) -> str | None:
    m = re.search(rf"^\s*{label}\s*:\s*(.+)$", text, flags=re.MULTILINE | re.IGNORECASE)
    return m.group(1).strip() if m else None


def build_record(
    exchange,
    user: tuple[str, str],
    backend: ModelBackend,
    clock: Callable[[], str],
    store: StoreHandle | None = None,
    prompts: PromptPack | None = None,
) -> MemoryRecord:
    """Condense ``exchange = (trigger, proposal, response)`` into a record.

    The backend answers with ``Summary:`` and ``Topic:`` lines; a missing
    summary falls back to the whole reply, a missing topic to the service name.
    """
    trigger, proposal, response = exchange
    if not response.full_text.strip():
        raise ValueError("cannot remember an exchange with an empty response")
    prompts = prompts or PromptPack.default()
    request = prompts.render(
        "memory.record",
        t=fmt_t(response.t),
        service=proposal.service_name,
        trigger=f"{trigger.cause.value}: {trigger.preliminary}",
        response=response.full_text,
    )
    reply = complete(backend, request).text
    summary = _labeled(reply, "Summary") or " ".join(reply.split()) or proposal.service_name
    topic = _labeled(reply, "Topic") or proposal.service_name
    taken = store.timestamps() if store is not None else set()
    timestamp = unique_timestamp(clock(), taken)
    user_id, user_role = user
    record_id = str(uuid.uuid5(_RECORD_NS, f"{user_id}|{timestamp}|{topic}|{summary}"))
    return MemoryRecord(
        record_id=record_id,
        user_id=user_id,
        user_role=user_role,
        summary=summary,
        final_output=response.instruction.text,
        timestamp=timestamp,
        topic=topic,
    )


def write(store: StoreHandle, record: MemoryRecord) -> str:
    with store._lock:
        store.pending.append(record)
    return record.record_id


def _check_unique(existing: list[MemoryRecord], new: list[MemoryRecord]) -> None:
    ids = {r.record_id for r in existing}
    stamps = {r.timestamp for r in existing}
    for r in new:
        if r.record_id in ids:
            raise DuplicateId(r.record_id)
        if r.timestamp in stamps:
            raise DuplicateTimestamp(r.timestamp)
        ids.add(r.record_id)
        stamps.add(r.timestamp)


def flush(store: StoreHandle) -> int:
    """Persist pending records; on any failure the file and the queue stay as they were."""
    with store._lock:
        batch = list(store.pending)
        if not batch:
            return 0
        _check_unique(store.index, batch)
        if store.path is not None:
            _atomic_append(store.path, batch)
        store._extend_index(batch)
        del store.pending[: len(batch)]
        return len(batch)


def _atomic_append(path: Path, batch: list[MemoryRecord]) -> None:
    directory = path.parent
    try:
        directory.mkdir(parents=True, exist_ok=True)
        existing = path.read_bytes() if path.exists() else b""
        if existing and not existing.endswith(b"\n"):
            existing += b"\n"
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(existing)
                fh.write("".join(r.to_json() + "\n" for r in batch).encode("utf-8"))
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except FileNotFoundError:  # pragma: no cover - cleanup best effort
                pass
            raise
    except OSError as exc:
        raise PersistenceFailure(f"could not persist {len(batch)} record(s) to {path}: {exc}") from exc


def retrieve(store: StoreHandle, query: MemoryQuery) -> list[MemoryRecord]:
    """Flushed records sharing at least one term with the query, best score first, newest first on ties."""
    if query.k == 0:
        return []
    terms = set(query.topic_terms)
    with store._lock:
        scored = [
            (len(terms & toks), rec)
            for rec, toks in zip(store.index, store._tokens)
        ]
    hits = [(s, r) for s, r in scored if s > 0]
    hits.sort(key=lambda sr: (sr[0], timestamp_key(sr[1].timestamp)), reverse=True)
    return [r for _, r in hits[: query.k]]


def render_record(record: MemoryRecord) -> str:
    return f"– [{record.timestamp}] {record.topic}: {record.summary}"


MEMORY_HEADER = "\n\nRelevant memory:\n"


def inject(prompt: str, records: list[MemoryRecord], budget: int) -> str:
    """Append whole rendered records while their total length stays within ``budget`` characters."""
    if budget < 0:
        raise ValueError("budget must be >= 0")
    lines: list[str] = []
    used = 0
    for rec in records:
        line = render_record(rec)
        if used + len(line) > budget:
            break
        lines.append(line)
        used += len(line)
    if not lines:
        return prompt
    return prompt + MEMORY_HEADER + "\n".join(lines)
