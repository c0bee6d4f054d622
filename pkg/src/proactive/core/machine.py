"""The machine loop: one event in, at most a handful of unit calls, a trace out."""

from __future__ import annotations

import dataclasses
import logging
from typing import Iterable

from .. import alu, cpu, input_unit, memory, output_unit
from ..backends import BackendFailure, BackendSlots, ModelBackend, Role, make_backend
from ..config import RunConfig
from ..errors import (
    EmptyCondensation,
    EmptySynthesis,
    MalformedDescription,
    MalformedPlan,
    MalformedProposal,
    MemoryStoreError,
    ProactiveError,
    SessionFailed,
    SinkFailure,
    StaleEvent,
)
from ..input_unit import Source, TriggerSignal, VisualDescription
from ..output_unit import ActionInstruction, Verbosity
from ..prompts import PromptPack, fmt_t
from .types import (
    Event,
    EventKind,
    Exchange,
    ServiceResponse,
    SessionState,
    SessionTrace,
    StepOutcome,
    Unit,
)

log = logging.getLogger(__name__)


def _slots_from_config(config: RunConfig, transport=None) -> BackendSlots:
    cache: dict = {}

    def build(spec) -> ModelBackend | None:
        if spec is None:
            return None
        if spec not in cache:
            cache[spec] = make_backend(spec, transport=transport)
        return cache[spec]

    orchestrator = build(config.orchestrator)
    streaming = build(config.streaming) or orchestrator
    trigger = build(config.trigger) or streaming
    if orchestrator is None or streaming is None:
        raise ValueError("config names no orchestrator/streaming backend")
    return BackendSlots(trigger=trigger, streaming=streaming, orchestrator=orchestrator)


def _provider_from_config(config: RunConfig, transport=None) -> alu.SearchProvider:
    search = config.search
    if search.live:
        return alu.LiveSearchProvider(
            search.endpoint, search.key_env, search.engine_env, search.timeout, transport=transport
        )
    if search.fixture_path:
        return alu.FixtureSearchProvider.from_file(search.fixture_path)
    return alu.FixtureSearchProvider({})


class Machine:
    """Wires Input -> CPU -> {ALU, Memory, Input} -> CPU -> Output for one configuration.

    Anything not passed explicitly is built from ``config``. ``transport`` is
    handed to every HTTP client the machine creates.
    """

    def __init__(
        self,
        config: RunConfig,
        backends: BackendSlots | None = None,
        prompts: PromptPack | None = None,
        search_provider: alu.SearchProvider | None = None,
        store: memory.StoreHandle | None = None,
        sink=None,
        registry: alu.ToolRegistry | None = None,
        clock: memory.ScenarioClock | None = None,
        session_id: str = "session",
        transport=None,
    ) -> None:
        self.config = config
        self.backends = backends or _slots_from_config(config, transport)
        self.prompts = prompts or PromptPack.default()
        if registry is None:
            provider = search_provider or _provider_from_config(config, transport)
            registry = alu.ToolRegistry([alu.web_search_tool(provider, config.search_k)])
        self.registry = registry
        self.store = store if store is not None else memory.StoreHandle.open(config.memory_path)
        self.sink = sink if sink is not None else output_unit.make_sink(config.sink, config.rate, config.sink_path)
        self.clock = clock or memory.ScenarioClock(config.clock_origin)
        self.session_id = session_id

    def new_session(self) -> SessionState:
        return SessionState(self.session_id, self.config)

    # ----------------------------------------------------------------- step

    def step(self, session: SessionState, event: Event) -> StepOutcome:
        if event.t < session.now:
            raise StaleEvent(f"event at {event.t} precedes session time {session.now}")
        start = len(session.trace)
        session.now = event.t
        output_unit.advance(self.sink, event.t)
        session.record(Unit.INPUT, "event", f"{event.kind.value} {event.payload}".rstrip())

        policy = self.config.policy
        candidates: list[TriggerSignal] = []
        obs = input_unit.ingest(event)
        if event.kind is EventKind.TICK:
            candidates = input_unit.due_timers(session, event.t)
        elif obs is not None:
            if obs.source is Source.SPEECH and input_unit.matches_command(self.config.interrupt_markers, obs):
                was_playing = output_unit.interrupt(self.sink, at=event.t)
                session.record(Unit.OUTPUT, "interrupt", "stopped" if was_playing else "idle")
            else:
                try:
                    signal = input_unit.detect(policy, session.window, obs, self.backends.trigger, self.prompts)
                except BackendFailure as exc:
                    session.record(Unit.INPUT, "error", f"trigger: {exc}")
                    raise
                if signal is not None:
                    candidates.append(signal)
            session.window.append(obs)

        outcome = StepOutcome()
        for signal in candidates:
            if input_unit.in_cooldown(policy, signal.t, session.last_trigger_t):
                session.record(Unit.INPUT, "suppressed", f"cooldown {signal.cause.value}: {signal.preliminary}")
                session.exchange_log.append(Exchange(signal, reason="cooldown"))
                continue
            session.last_trigger_t = signal.t
            session.record(Unit.INPUT, "trigger", f"{signal.cause.value}: {signal.preliminary}")
            response = self._exchange(session, signal)
            outcome.trigger, outcome.response = signal, response
            outcome.exchanges.append(session.exchange_log[-1])
        outcome.trace = session.trace[start:]
        return outcome

    # ------------------------------------------------------------- exchange

    def _describe(self, session: SessionState, signal: TriggerSignal, window) -> VisualDescription:
        if not window:
            return VisualDescription(signal.t, signal.preliminary or "(nothing observed yet)", "preliminary")
        try:
            desc = input_unit.describe_scene(
                self.backends.streaming, window, self.config.describe_prompt_id, self.prompts
            )
        except (BackendFailure, MalformedDescription) as exc:
            session.record(Unit.INPUT, "describe.failed", str(exc))
            return VisualDescription(signal.t, signal.preliminary or window[-1].text, "preliminary")
        return dataclasses.replace(desc, t=signal.t)

    def _exchange(self, session: SessionState, signal: TriggerSignal) -> ServiceResponse:
        cfg = self.config
        orchestrator = self.backends.orchestrator
        window = tuple(session.window)

        description = self._describe(session, signal, window)
        session.record(Unit.INPUT, "describe", description.text)

        try:
            proposal = cpu.classify(signal, description, orchestrator, self.prompts)
        except (BackendFailure, MalformedProposal) as exc:
            session.record(Unit.CPU, "error", f"classify: {type(exc).__name__}: {exc}")
            session.exchange_log.append(Exchange(signal, reason=f"aborted: {exc}"))
            raise
        session.record(Unit.CPU, "proposal", proposal.service_name)
        session.record(Unit.CPU, "reasoning", proposal.reasoning)

        if cfg.planner == "rules":
            plan = cpu.fallback_plan(proposal, cfg)
        else:
            context = input_unit.render_window(window)
            try:
                plan = cpu.decompose(proposal, context, cfg, orchestrator, self.prompts)
            except (BackendFailure, MalformedPlan) as exc:
                session.record(Unit.CPU, "plan.fallback", f"{type(exc).__name__}: {exc}")
                plan = cpu.fallback_plan(proposal, cfg)
        session.record(Unit.CPU, "plan", plan.render())

        units = cpu.Units(
            session=session,
            prompts=self.prompts,
            streaming=self.backends.streaming,
            orchestrator=orchestrator,
            registry=self.registry,
            store=self.store,
            describe_prompt_id=cfg.describe_prompt_id,
            personalization=cfg.personalization,
            memory_k=cfg.memory_k,
            injection_budget=cfg.injection_budget,
            max_workers=cfg.max_workers,
            window=window,
            service=proposal.service_name,
        )
        results = cpu.execute_plan(plan, units, orchestrator, on_trace=session.record)

        request = cpu.synthesis_request(proposal, description, results, self.prompts)
        session.record(
            Unit.CPU,
            "synthesize.prompt",
            "\n".join(m.content for m in request.messages if m.role is Role.USER),
        )
        try:
            draft = cpu.synthesize(proposal, description, results, orchestrator, self.prompts)
        except (BackendFailure, EmptySynthesis) as exc:
            session.record(Unit.CPU, "synthesize.failed", f"{type(exc).__name__}: {exc}")
            draft = cpu.DraftResponse(description.text, ())
        session.record(Unit.CPU, "synthesize", draft.text)
        session.record(Unit.CPU, "provenance", ",".join(str(i) for i in draft.provenance))

        try:
            instruction = output_unit.condense(draft, orchestrator, cfg.verbosity, self.prompts)
        except (BackendFailure, EmptyCondensation) as exc:
            session.record(Unit.OUTPUT, "condense.failed", f"{type(exc).__name__}: {exc}")
            instruction = ActionInstruction(output_unit.first_sentence(draft.text), Verbosity.BRIEF)
        session.record(Unit.OUTPUT, "condense", instruction.text)

        response = ServiceResponse(signal.t, proposal.service_name, draft.text, instruction, draft.provenance)
        try:
            receipt = output_unit.deliver(self.sink, instruction, signal.t)
            session.record(
                Unit.OUTPUT,
                "deliver",
                f"{receipt.sink_id} {fmt_t(receipt.t_start)}-{fmt_t(receipt.t_end)} chars={receipt.emitted_chars}",
            )
        except SinkFailure as exc:
            session.record(Unit.OUTPUT, "deliver.failed", str(exc))
        session.exchange_log.append(Exchange(signal, response))

        self._remember(session, signal, proposal, response)
        return response

    def _remember(self, session, signal, proposal, response) -> None:
        if self.store is None:
            return
        try:
            record = memory.build_record(
                (signal, proposal, response),
                (self.config.user_id, self.config.user_role),
                self.backends.orchestrator,
                clock=lambda: self.clock.at(signal.t),
                store=self.store,
                prompts=self.prompts,
            )
            memory.write(self.store, record)
            session.record(Unit.MEMORY, "write", f"{record.timestamp} {record.topic}")
            written = memory.flush(self.store)
            session.record(Unit.MEMORY, "flush", str(written))
        except (BackendFailure, MemoryStoreError) as exc:
            session.record(Unit.MEMORY, "write.failed", f"{type(exc).__name__}: {exc}")

    # -------------------------------------------------------------- session

    def close(self, session: SessionState) -> int:
        if self.store is None:
            return 0
        written = memory.flush(self.store)
        if written:
            session.record(Unit.MEMORY, "flush", str(written))
        return written

    def run_session(self, events: Iterable[Event]) -> SessionTrace:
        session = self.new_session()
        try:
            for event in events:
                self.step(session, event)
        except ProactiveError as exc:
            try:
                self.close(session)
            except MemoryStoreError:  # pragma: no cover - keep the original failure
                log.exception("flush after failure also failed")
            raise SessionFailed(f"{type(exc).__name__}: {exc}", SessionTrace(list(session.trace), session)) from exc
        self.close(session)
        return SessionTrace(list(session.trace), session)


def step(machine: Machine, session: SessionState, event: Event) -> StepOutcome:
    return machine.step(session, event)


def run_session(config: RunConfig, events: Iterable[Event], **resources) -> SessionTrace:
    return Machine(config, **resources).run_session(events)
