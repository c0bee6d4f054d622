"""Perception front end: event normalization, the trigger policy, scene description, timers."""

from __future__ import annotations

import bisect
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .backends import ModelBackend, complete
from .core.types import Event, EventKind, SessionState
from .errors import InvalidTime, MalformedDescription
from .prompts import PromptPack, fmt_t

DESCRIPTION_MARKER = "[Visual Description]"


class Source(str, Enum):
    FRAME = "Frame"
    SPEECH = "Speech"


@dataclass(frozen=True)
class Observation:
    t: float
    text: str
    source: Source

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("observation text must be non-empty")


class TriggerCause(str, Enum):
    USER_COMMAND = "UserCommand"
    INTENT_CHANGE = "IntentChange"
    SCHEDULED_TIMER = "ScheduledTimer"


@dataclass(frozen=True)
class TriggerSignal:
    t: float
    cause: TriggerCause
    preliminary: str


class PolicyMode(str, Enum):
    RULE_BASED = "RuleBased"
    MODEL_BACKED = "ModelBacked"


@dataclass(frozen=True)
class TriggerPolicy:
    mode: PolicyMode = PolicyMode.RULE_BASED
    change_predicate: str | None = "numeric_count"
    command_markers: tuple[str, ...] = ()
    cooldown: float = 3.0
    prompt_id: str | None = None
    dwell_n: int = 3
    novelty_threshold: float = 0.2

    def __post_init__(self) -> None:
        if not isinstance(self.mode, PolicyMode):
            object.__setattr__(self, "mode", PolicyMode(self.mode))
        object.__setattr__(self, "command_markers", tuple(self.command_markers))
        if self.cooldown < 0:
            raise ValueError("cooldown must be >= 0")
        if self.mode is PolicyMode.RULE_BASED:
            if self.change_predicate not in PREDICATES:
                raise ValueError(f"unknown change predicate {self.change_predicate!r}")
        elif not self.prompt_id:
            raise ValueError("ModelBacked policy requires a prompt_id")
        if self.dwell_n < 1:
            raise ValueError("dwell_n must be >= 1")


@dataclass(frozen=True)
class VisualDescription:
    t: float
    text: str
    prompt_id: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("visual description text must be non-empty")


# ----------------------------------------------------------------- predicates

_STOPWORDS = frozenset(
    """a an and are as at be been by for from has have his her in into is it its
    of on or that the their them then there these this those to was were which
    while with who near next over under one two three some several other others
    person player user visitor shopper wearer they he she you your""".split()
)
_NUMBER = re.compile(r"\b\d+(?:\.\d+)?\b")
_WORD = re.compile(r"[a-z]+")


def content_tokens(text: str) -> list[str]:
    return [w for w in _WORD.findall(text.lower()) if len(w) >= 3 and w not in _STOPWORDS]


def numeric_count(text: str) -> int:
    return len(_NUMBER.findall(text))


def dominant_term(text: str) -> str | None:
    """Most frequent content token; ties go to the earliest occurrence."""
    tokens = content_tokens(text)
    if not tokens:
        return None
    counts = Counter(tokens)
    best = max(counts.values())
    return next(tok for tok in tokens if counts[tok] == best)


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _numeric_count_changed(window: Sequence[Observation], obs: Observation, policy: TriggerPolicy) -> bool:
    frames = [o for o in window if o.source is obs.source]
    if not frames:
        return False
    return numeric_count(frames[-1].text) != numeric_count(obs.text)


def _dwell(window: Sequence[Observation], obs: Observation, policy: TriggerPolicy) -> bool:
    # fires once, when a run of the same dominant term reaches exactly dwell_n
    n = policy.dwell_n
    run = [*list(window)[-n:], obs]
    term = dominant_term(obs.text)
    if term is None or len(run) < n:
        return False
    if any(dominant_term(o.text) != term for o in run[-n:]):
        return False
    return len(run) == n or dominant_term(run[0].text) != term


def _novel_scene(window: Sequence[Observation], obs: Observation, policy: TriggerPolicy) -> bool:
    if not window:
        return False
    new = set(content_tokens(obs.text))
    best = max(jaccard(new, set(content_tokens(o.text))) for o in window)
    return best < policy.novelty_threshold


PREDICATES: dict[str, Callable[[Sequence[Observation], Observation, TriggerPolicy], bool]] = {
    "numeric_count": _numeric_count_changed,
    "dwell": _dwell,
    "novel_scene": _novel_scene,
}


# ----------------------------------------------------------------- operations


def ingest(event: Event) -> Observation | None:
    if event.kind is EventKind.TICK:
        return None
    source = Source.FRAME if event.kind is EventKind.FRAME else Source.SPEECH
    return Observation(event.t, event.payload, source)


def render_window(window: Sequence[Observation]) -> str:
    return "\n".join(f"[{fmt_t(o.t)}] ({o.source.value}) {o.text}" for o in window) or "(empty)"


def matches_command(markers: Sequence[str], obs: Observation) -> bool:
    if obs.source is not Source.SPEECH:
        return False
    text = obs.text.lower()
    return any(re.search(rf"\b{re.escape(m.lower())}\b", text) for m in markers if m)


def detect(
    policy: TriggerPolicy,
    window: Sequence[Observation],
    new_obs: Observation,
    backend: ModelBackend | None = None,
    prompts: PromptPack | None = None,
) -> TriggerSignal | None:
    """Candidate trigger for ``new_obs``, ignoring cooldown.

    A command marker in speech wins over any detected change.
    """
    if matches_command(policy.command_markers, new_obs):
        return TriggerSignal(new_obs.t, TriggerCause.USER_COMMAND, new_obs.text)
    if policy.mode is PolicyMode.RULE_BASED:
        if PREDICATES[policy.change_predicate](window, new_obs, policy):
            return TriggerSignal(new_obs.t, TriggerCause.INTENT_CHANGE, new_obs.text)
        return None
    if backend is None:
        raise ValueError("ModelBacked policy needs a backend")
    prompts = prompts or PromptPack.default()
    request = prompts.render(
        policy.prompt_id,
        window=render_window(window),
        t=fmt_t(new_obs.t),
        observation=new_obs.text,
    )
    reply = complete(backend, request).text.strip()
    if not reply.upper().startswith("TRIGGER"):
        return None
    sketch = reply[len("TRIGGER"):].lstrip(" :").strip() or new_obs.text
    return TriggerSignal(new_obs.t, TriggerCause.INTENT_CHANGE, sketch)


def in_cooldown(policy: TriggerPolicy, t: float, last_trigger_t: float | None) -> bool:
    return last_trigger_t is not None and t - last_trigger_t < policy.cooldown


def evaluate_trigger(
    policy: TriggerPolicy,
    window: Sequence[Observation],
    new_obs: Observation,
    last_trigger_t: float | None,
    backend: ModelBackend | None = None,
    prompts: PromptPack | None = None,
) -> TriggerSignal | None:
    if in_cooldown(policy, new_obs.t, last_trigger_t):
        return None
    return detect(policy, window, new_obs, backend, prompts)


def parse_description(text: str) -> str:
    body = text.strip()
    if not body.startswith(DESCRIPTION_MARKER):
        raise MalformedDescription(f"description lacks {DESCRIPTION_MARKER!r}: {body[:60]!r}")
    body = body[len(DESCRIPTION_MARKER):].strip()
    # a model may repeat the marker; the parsed text never carries it
    body = body.replace(DESCRIPTION_MARKER, " ").strip()
    if not body:
        raise MalformedDescription("description is empty after the marker")
    return body


def describe_scene(
    backend: ModelBackend,
    window: Sequence[Observation],
    prompt_id: str,
    prompts: PromptPack | None = None,
    focus: str = "",
) -> VisualDescription:
    if not window:
        raise ValueError("describe_scene needs a non-empty window")
    prompts = prompts or PromptPack.default()
    t = max(o.t for o in window)
    request = prompts.render(prompt_id, t=fmt_t(t), focus=focus or "(none)", window=render_window(window))
    reply = complete(backend, request).text
    return VisualDescription(t, parse_description(reply), prompt_id)


def schedule_timer(session: SessionState, fire_t: float, purpose: str) -> None:
    if fire_t <= session.now:
        raise InvalidTime(f"timer at {fire_t} is not after now={session.now}")
    with session.lock:
        bisect.insort(session.pending_timers, (fire_t, purpose))


def due_timers(session: SessionState, t: float) -> list[TriggerSignal]:
    """Pop every timer with ``fire_t <= t``, in fire order, as ScheduledTimer signals at ``t``."""
    with session.lock:
        cut = bisect.bisect_right(session.pending_timers, (t, chr(0x10FFFF)))
        due, session.pending_timers[:] = session.pending_timers[:cut], session.pending_timers[cut:]
    return [TriggerSignal(t, TriggerCause.SCHEDULED_TIMER, purpose) for _, purpose in due]


__all__ = [
    "DESCRIPTION_MARKER",
    "Observation",
    "PolicyMode",
    "PREDICATES",
    "Source",
    "TriggerCause",
    "TriggerPolicy",
    "TriggerSignal",
    "VisualDescription",
    "content_tokens",
    "describe_scene",
    "detect",
    "dominant_term",
    "due_timers",
    "evaluate_trigger",
    "ingest",
    "in_cooldown",
    "numeric_count",
    "schedule_timer",
]
