"""The orchestrator: classify a triggered moment, plan sub-tasks, run them, merge the results."""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Sequence

from . import alu, input_unit, memory
from .backends import ModelBackend, complete
from .core.types import SessionState, Unit
from .errors import EmptySynthesis, MalformedPlan, MalformedProposal, ProactiveError
from .input_unit import Observation, TriggerSignal, VisualDescription
from .prompts import PromptPack, fmt_t

if TYPE_CHECKING:
    from .config import RunConfig


@dataclass(frozen=True)
class ServiceProposal:
    t: float
    service_name: str
    reasoning: str

    def __post_init__(self) -> None:
        if not self.service_name.strip():
            raise ValueError("service_name must be non-empty")


class Target(str, Enum):
    DIRECT_ANSWER = "DirectAnswer"
    SCHEDULE_TRIGGER = "ScheduleTrigger"
    DESCRIBE_SCENE = "DescribeScene"
    TOOL_CALL = "ToolCall"
    MEMORY_RETRIEVE = "MemoryRetrieve"


@dataclass(frozen=True)
class SubTask:
    id: int
    target: Target
    payload: str


@dataclass(frozen=True)
class DispatchPlan:
    proposal: ServiceProposal
    subtasks: tuple[SubTask, ...] = ()

    def __post_init__(self) -> None:
        ids = [s.id for s in self.subtasks]
        if ids != list(range(1, len(ids) + 1)):
            raise MalformedPlan(f"sub-task ids must run 1..n, got {ids}")
        direct = [s for s in self.subtasks if s.target is Target.DIRECT_ANSWER]
        if direct and len(self.subtasks) > 1:
            raise MalformedPlan("a DirectAnswer sub-task must be the only sub-task")

    def render(self) -> str:
        return "\n".join(f"{s.id} {s.target.value}: {s.payload}" for s in self.subtasks) or "(empty)"


class Status(str, Enum):
    OK = "Ok"
    FAILED = "Failed"
    SKIPPED = "Skipped"


@dataclass(frozen=True)
class SubTaskResult:
    subtask_id: int
    status: Status
    content: str
    target: Target | None = None

    def __post_init__(self) -> None:
        if self.status is Status.OK and not self.content:
            raise ValueError("an Ok result needs content")


@dataclass(frozen=True)
class DraftResponse:
    text: str
    provenance: tuple[int, ...] = ()


# ------------------------------------------------------------------- classify


def _labeled(text: str, label: str) -> re.Match | None:
    return re.search(rf"^\s*{label}\s*:\s*(.*)$", text, flags=re.MULTILINE | re.IGNORECASE)


def parse_proposal(t: float, text: str) -> ServiceProposal:
    service = _labeled(text, "Service")
    reasoning = _labeled(text, "Reasoning")
    if service is None or reasoning is None or not service.group(1).strip():
        raise MalformedProposal(f"expected 'Service:' and 'Reasoning:' lines, got {text[:80]!r}")
    # reasoning may continue over following lines
    rest = text[reasoning.start(1):].strip()
    return ServiceProposal(t, service.group(1).strip(), rest)


def classify(
    trigger: TriggerSignal,
    description: VisualDescription,
    backend: ModelBackend,
    prompts: PromptPack | None = None,
) -> ServiceProposal:
    if description.t != trigger.t:
        raise ValueError(f"description at {description.t} does not match trigger at {trigger.t}")
    prompts = prompts or PromptPack.default()
    request = prompts.render(
        "cpu.classify",
        t=fmt_t(trigger.t),
        cause=trigger.cause.value,
        preliminary=trigger.preliminary,
        description=description.text,
    )
    return parse_proposal(trigger.t, complete(backend, request).text)


# ------------------------------------------------------------------ decompose

_PLAN_LINE = re.compile(r"^\s*(?:[-*]\s*|\d+[.)]\s*)?([A-Za-z]+)\s*:\s*(.*?)\s*$")


def parse_plan(proposal: ServiceProposal, text: str) -> list[tuple[Target, str]]:
    lines = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        m = _PLAN_LINE.match(raw)
        if m is None:
            raise MalformedPlan(f"not a 'TARGET: payload' line: {raw!r}")
        try:
            target = Target(m.group(1))
        except ValueError:
            raise MalformedPlan(f"unknown target {m.group(1)!r}") from None
        lines.append((target, m.group(2)))
    return lines


def build_plan(proposal: ServiceProposal, lines: Sequence[tuple[Target, str]], personalization: bool) -> DispatchPlan:
    lines = list(lines)
    has_direct = any(t is Target.DIRECT_ANSWER for t, _ in lines)
    if personalization and not has_direct and not any(t is Target.MEMORY_RETRIEVE for t, _ in lines):
        lines.append((Target.MEMORY_RETRIEVE, proposal.service_name))
    subtasks = tuple(SubTask(i, target, payload) for i, (target, payload) in enumerate(lines, start=1))
    return DispatchPlan(proposal, subtasks)


def decompose(
    proposal: ServiceProposal,
    context: str,
    config: "RunConfig",
    backend: ModelBackend,
    prompts: PromptPack | None = None,
) -> DispatchPlan:
    prompts = prompts or PromptPack.default()
    request = prompts.render(
        "cpu.decompose",
        t=fmt_t(proposal.t),
        service=proposal.service_name,
        reasoning=proposal.reasoning,
        context=context or "(none)",
    )
    lines = parse_plan(proposal, complete(backend, request).text)
    return build_plan(proposal, lines, config.personalization)


def fallback_plan(proposal: ServiceProposal, config: "RunConfig") -> DispatchPlan:
    """Rule plan used when the model plan is unavailable: search the service name."""
    return build_plan(proposal, [(Target.TOOL_CALL, proposal.service_name)], config.personalization)


# --------------------------------------------------------------- execute_plan

TraceSink = Callable[[Unit, str, str], None]


@dataclass
class Units:
    """Handles the executor routes sub-tasks to."""

    session: SessionState
    prompts: PromptPack
    streaming: ModelBackend
    orchestrator: ModelBackend
    registry: alu.ToolRegistry
    store: memory.StoreHandle | None
    describe_prompt_id: str
    personalization: bool = False
    memory_k: int = 3
    injection_budget: int = 1200
    max_workers: int = 4
    window: tuple[Observation, ...] = field(default_factory=tuple)
    service: str = ""


_OFFSET = re.compile(r"(\+)?\s*(\d+(?:\.\d+)?)")


def parse_fire_time(payload: str, now: float) -> float:
    """``"+10"``/``"recheck at +10"`` are relative to now; a bare number is absolute."""
    m = _OFFSET.search(payload)
    if m is None:
        raise MalformedPlan(f"no time in ScheduleTrigger payload {payload!r}")
    value = float(m.group(2))
    return now + value if m.group(1) else value


def _run_subtask(task: SubTask, units: Units, backend: ModelBackend, log: list) -> SubTaskResult:
    def note(unit: Unit, label: str, body: str) -> None:
        log.append((unit, label, body))

    target = task.target
    if target is Target.DIRECT_ANSWER:
        request = units.prompts.render(
            "cpu.direct", t=fmt_t(units.session.now), service=units.service, query=task.payload
        )
        text = complete(backend, request).text.strip()
        return SubTaskResult(task.id, Status.OK if text else Status.FAILED, text or "empty answer", target)

    if target is Target.SCHEDULE_TRIGGER:
        fire_t = parse_fire_time(task.payload, units.session.now)
        input_unit.schedule_timer(units.session, fire_t, task.payload)
        note(Unit.INPUT, "timer", f"{fmt_t(fire_t)} {task.payload}")
        return SubTaskResult(task.id, Status.OK, f"timer set for {fmt_t(fire_t)}s: {task.payload}", target)

    if target is Target.DESCRIBE_SCENE:
        if not units.window:
            return SubTaskResult(task.id, Status.SKIPPED, "", target)
        desc = input_unit.describe_scene(
            units.streaming, units.window, units.describe_prompt_id, units.prompts, focus=task.payload
        )
        note(Unit.INPUT, "describe", desc.text)
        return SubTaskResult(task.id, Status.OK, desc.text, target)

    if target is Target.TOOL_CALL:
        decision = alu.decide(task.payload, units.orchestrator, units.prompts)
        if isinstance(decision, alu.Answer):
            note(Unit.ALU, "decide", f"answer: {decision.text}")
            if not decision.text:
                return SubTaskResult(task.id, Status.FAILED, "empty answer", target)
            return SubTaskResult(task.id, Status.OK, decision.text, target)
        note(Unit.ALU, "decide", f"search: {decision.query}")
        text = alu.invoke(units.registry, alu.ToolCall(alu.WEB_SEARCH, decision.query))
        note(Unit.ALU, "search", text)
        return SubTaskResult(task.id, Status.OK, text, target)

    if target is Target.MEMORY_RETRIEVE:
        if not units.personalization or units.store is None:
            return SubTaskResult(task.id, Status.SKIPPED, "", target)
        records = memory.retrieve(units.store, memory.MemoryQuery.from_text(task.payload, units.memory_k))
        note(Unit.MEMORY, "retrieve", f"{len(records)} record(s) for {task.payload!r}")
        block = memory.inject("", records, units.injection_budget).strip()
        if not block:
            return SubTaskResult(task.id, Status.SKIPPED, "", target)
        return SubTaskResult(task.id, Status.OK, block, target)

    raise MalformedPlan(f"unroutable target {target}")  # pragma: no cover


def execute_plan(
    plan: DispatchPlan,
    units: Units,
    backend: ModelBackend,
    on_trace: TraceSink | None = None,
) -> list[SubTaskResult]:
    """Run every sub-task, possibly concurrently; results and trace notes come back in plan order."""
    if not plan.subtasks:
        return []
    logs: list[list] = [[] for _ in plan.subtasks]

    def run(i: int, task: SubTask) -> SubTaskResult:
        try:
            return _run_subtask(task, units, backend, logs[i])
        except ProactiveError as exc:
            return SubTaskResult(task.id, Status.FAILED, f"{type(exc).__name__}: {exc}", task.target)

    workers = max(1, min(units.max_workers, len(plan.subtasks)))
    if workers == 1:
        results = [run(i, task) for i, task in enumerate(plan.subtasks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run, i, task) for i, task in enumerate(plan.subtasks)]
            results = [f.result() for f in futures]
    if on_trace is not None:
        for log, result in zip(logs, results):
            for entry in log:
                on_trace(*entry)
            on_trace(Unit.CPU, "result", f"#{result.subtask_id} {result.status.value}: {result.content}")
    return results


# ----------------------------------------------------------------- synthesize

_TOOL_TARGETS = (Target.TOOL_CALL, Target.DIRECT_ANSWER, Target.SCHEDULE_TRIGGER)


def render_evidence(description: VisualDescription, results: Sequence[SubTaskResult]) -> str:
    """Evidence in fixed priority order: tool results, then what was seen, then memory."""
    ok = [r for r in results if r.status is Status.OK]
    tools = [r for r in ok if r.target in _TOOL_TARGETS or r.target is None]
    scene = [r for r in ok if r.target is Target.DESCRIBE_SCENE]
    recalled = [r for r in ok if r.target is Target.MEMORY_RETRIEVE]
    parts = ["Tool results:"]
    parts += [f"[#{r.subtask_id}] {r.content}" for r in tools] or ["(none)"]
    parts.append("Visual description:")
    parts.append(description.text)
    parts += [f"[#{r.subtask_id}] {r.content}" for r in scene]
    parts.append("Memory:")
    parts += [f"[#{r.subtask_id}] {r.content}" for r in recalled] or ["(none)"]
    return "\n".join(parts)


def synthesis_request(
    proposal: ServiceProposal,
    description: VisualDescription,
    results: Sequence[SubTaskResult],
    prompts: PromptPack,
):
    return prompts.render(
        "cpu.synthesize",
        t=fmt_t(proposal.t),
        service=proposal.service_name,
        reasoning=proposal.reasoning,
        evidence=render_evidence(description, results),
    )


def synthesize(
    proposal: ServiceProposal,
    description: VisualDescription,
    results: Sequence[SubTaskResult],
    backend: ModelBackend,
    prompts: PromptPack | None = None,
) -> DraftResponse:
    prompts = prompts or PromptPack.default()
    text = complete(backend, synthesis_request(proposal, description, results, prompts)).text.strip()
    if not text:
        raise EmptySynthesis(f"empty synthesis for {proposal.service_name!r}")
    echoed = tuple(
        r.subtask_id for r in results if r.status is Status.OK and f"[#{r.subtask_id}]" in text
    )
    return DraftResponse(text, echoed)
