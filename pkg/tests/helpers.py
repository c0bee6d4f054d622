"""Shared test doubles and independent oracles."""

from __future__ import annotations

import re
from datetime import datetime

from proactive.backends import CallbackBackend, ModelRequest
from proactive.config import RunConfig
from proactive.core.machine import Machine
from proactive.input_unit import TriggerPolicy

GENERIC = {
    "describe": "[Visual Description] A table with some objects on it.",
    "cpu.classify": "Service: General Help\nReasoning: something changed",
    "cpu.decompose": "ToolCall: what is on the table",
    "cpu.direct": "It is a table.",
    "cpu.synthesize": "There is a table. It has objects on it. [#1]",
    "output.condense": "Look at the table. It has objects.",
    "memory.record": "Summary: saw a table\nTopic: table",
    "alu.decide": "A table.",
    "trigger": "NONE",
}


def generic_responder(overrides: dict[str, str] | None = None):
    table = {**GENERIC, **(overrides or {})}

    def respond(request: ModelRequest) -> str:
        pid = request.prompt_id
        if pid in table:
            return table[pid]
        return table[pid.split(".", 1)[0]]

    return respond


def generic_backend(overrides: dict[str, str] | None = None) -> CallbackBackend:
    return CallbackBackend(generic_responder(overrides))


def generic_machine(overrides: dict[str, str] | None = None, **config) -> Machine:
    """Machine with every slot on the generic responder and an empty search table."""
    from proactive.alu import FixtureSearchProvider
    from proactive.backends import BackendSlots

    backend = generic_backend(overrides)
    config.setdefault("policy", TriggerPolicy())
    cfg = RunConfig(**config)
    slots = BackendSlots(backend, backend, backend)
    return Machine(cfg, backends=slots, search_provider=FixtureSearchProvider({}))


# ------------------------------------------------------------------- oracles


def oracle_tokens(text: str) -> set[str]:
    return {w for w in re.split(r"[^0-9a-z]+", text.lower()) if w}


def _oracle_time(ts: str) -> tuple[datetime, int]:
    if "Z-" in ts:
        head, suffix = ts.split("Z-")
        return datetime.strptime(head, "%Y-%m-%dT%H:%M:%S"), int(suffix)
    return datetime.strptime(ts, "%Y-%m-%dT%H:%M:%SZ"), 0


def oracle_retrieve(records, terms, k):
    """Full scan, then a stable sort by timestamp desc and a stable sort by score desc."""
    scored = []
    for rec in records:
        score = len(set(terms) & (oracle_tokens(rec.topic) | oracle_tokens(rec.summary)))
        if score:
            scored.append((score, rec))
    scored = sorted(scored, key=lambda p: _oracle_time(p[1].timestamp), reverse=True)
    scored = sorted(scored, key=lambda p: p[0], reverse=True)
    return [rec for _, rec in scored[:k]]


def oracle_sentences(text: str) -> list[str]:
    """Character-by-character sentence splitter used as a check on the condense rule."""
    flat = " ".join(text.split())
    out, cur = [], ""
    for i, ch in enumerate(flat):
        cur += ch
        nxt = flat[i + 1] if i + 1 < len(flat) else " "
        if ch in ".!?" and nxt == " ":
            out.append(cur.strip())
            cur = ""
    if cur.strip():
        out.append(cur.strip())
    return out
