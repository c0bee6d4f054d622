"""Scenario files, replay and golden-trace comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .backends import Scripted
from .config import RunConfig, SearchConfig, config_from_dict
from .core.machine import Machine
from .core.types import Event, EventKind, SessionTrace, TraceEntry, parse_trace
from .errors import MissingFixture, ParseError
from .prompts import PromptPack

SCENARIO_KEYS = ("name", "events", "prompt_pack", "model_fixtures", "search_fixtures", "expected")


@dataclass
class Scenario:
    name: str
    events: list[Event]
    prompt_pack: str
    model_fixtures: str
    search_fixtures: str
    expected: str | None = None
    # optional RunConfig overrides shipped with the scenario
    config: dict[str, Any] = field(default_factory=dict)
    path: Path | None = None

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path is not None else Path.cwd()

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else (self.base_dir / p).resolve()

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "events": [e.to_dict() for e in self.events],
            "prompt_pack": self.prompt_pack,
            "model_fixtures": self.model_fixtures,
            "search_fixtures": self.search_fixtures,
            "expected": self.expected,
        }
        if self.config:
            out["config"] = self.config
        return out

    def run_config(self) -> RunConfig:
        """Scripted backends on the scenario fixtures, then the scenario's own overrides."""
        fixtures = str(self.resolve(self.model_fixtures))
        base = RunConfig(
            trigger=Scripted(fixtures),
            streaming=Scripted(fixtures),
            orchestrator=Scripted(fixtures),
            search=SearchConfig(fixture_path=str(self.resolve(self.search_fixtures))),
        )
        return config_from_dict(self.config, base, self.base_dir)


def _fail(path, where: str, msg: str) -> ParseError:
    return ParseError(f"{path}: {where}: {msg}")


def parse_scenario(data: Any, path: Path | None = None, check_files: bool = True) -> Scenario:
    if not isinstance(data, dict):
        raise _fail(path, "top level", "expected a JSON object")
    for key in ("name", "events", "prompt_pack", "model_fixtures", "search_fixtures"):
        if key not in data:
            raise _fail(path, key, "missing required field")
    unknown = set(data) - set(SCENARIO_KEYS) - {"config"}
    if unknown:
        raise _fail(path, "top level", f"unknown fields {sorted(unknown)}")
    events: list[Event] = []
    prev = 0.0
    for i, raw in enumerate(data["events"]):
        where = f"events[{i}]"
        try:
            t = float(raw["t"])
            kind = EventKind(raw["kind"])
            payload = raw.get("payload", "")
        except (KeyError, TypeError, ValueError) as exc:
            raise _fail(path, where, f"malformed event ({exc})") from None
        if t < 0:
            raise _fail(path, where, f"negative time {t}")
        if t < prev:
            raise _fail(path, where, f"out of order: t={t} after t={prev}")
        if kind is not EventKind.TICK and not payload:
            raise _fail(path, where, "empty payload")
        events.append(Event(t, kind, payload))
        prev = t
    config = data.get("config") or {}
    if not isinstance(config, dict):
        raise _fail(path, "config", "expected an object")
    scenario = Scenario(
        name=data["name"],
        events=events,
        prompt_pack=data["prompt_pack"],
        model_fixtures=data["model_fixtures"],
        search_fixtures=data["search_fixtures"],
        expected=data.get("expected"),
        config=config,
        path=path,
    )
    if check_files:
        for key in ("prompt_pack", "model_fixtures", "search_fixtures"):
            target = scenario.resolve(getattr(scenario, key))
            if not target.exists():
                raise MissingFixture(f"{path}: {key} -> {target} does not exist")
    return scenario


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("proactive.scenarios").joinpath(name, "scenario.json")))


BUNDLED = ("blackjack", "museum", "retail")


def load_scenario(path: str | Path, check_files: bool = True) -> Scenario:
    """Load a scenario file; a bare bundled name such as ``"blackjack"`` also works."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_path(str(path))
    try:
        with open(p, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ParseError(f"{p}: no such scenario file") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: line {exc.lineno}: {exc.msg}") from None
    return parse_scenario(data, p.resolve(), check_files)


def dump_scenario(scenario: Scenario, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_dict(), fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def make_machine(scenario: Scenario, config: RunConfig | None = None, **resources) -> Machine:
    cfg = config or scenario.run_config()
    prompts = resources.pop("prompts", None) or PromptPack.load(scenario.resolve(scenario.prompt_pack))
    return Machine(cfg, prompts=prompts, session_id=scenario.name, **resources)


def replay(scenario: Scenario, config: RunConfig | None = None, **resources) -> SessionTrace:
    """Build a machine for ``scenario`` and run every event through it; memory is flushed on close."""
    return make_machine(scenario, config, **resources).run_session(scenario.events)


# ------------------------------------------------------------------ comparison


@dataclass
class DiffReport:
    byte_equal: bool
    differences: list[str]

    @property
    def ok(self) -> bool:
        return self.byte_equal and not self.differences

    @property
    def exit_status(self) -> int:
        return 0 if self.ok else 1

    def render(self) -> str:
        if self.ok:
            return "traces identical"
        lines = [] if self.byte_equal else ["serialized traces differ"]
        return "\n".join(lines + self.differences)


def _key(e: TraceEntry) -> str:
    return f"(t={round(e.t, 3)}, seq={e.seq})"


def diff_entries(actual: list[TraceEntry], golden: list[TraceEntry]) -> list[str]:
    out = []
    for a, g in zip(actual, golden):
        for name in ("t", "seq", "unit", "label", "body"):
            av, gv = getattr(a, name), getattr(g, name)
            if name == "t":
                av, gv = round(av, 3), round(gv, 3)
            if av != gv:
                out.append(f"changed entry {_key(g)} {name}: expected {gv!r}, got {av!r}")
    for g in golden[len(actual):]:
        out.append(f"missing entry {_key(g)} {g.unit.value}/{g.label}")
    for a in actual[len(golden):]:
        out.append(f"unexpected entry {_key(a)} {a.unit.value}/{a.label}")
    return out


def compare_trace(actual: SessionTrace | str, golden: str | Path) -> DiffReport:
    actual_text = actual if isinstance(actual, str) else actual.serialize()
    with open(golden, encoding="utf-8") as fh:
        golden_text = fh.read()
    try:
        golden_entries = parse_trace(golden_text)
    except (ValueError, KeyError) as exc:
        raise ParseError(f"{golden}: unreadable golden trace ({exc})") from None
    return DiffReport(actual_text == golden_text, diff_entries(parse_trace(actual_text), golden_entries))
