"""Command line: run, compare, record-golden, validate-fixtures."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .alu import FixtureSearchProvider
from .backends import BackendSlots, FixtureMiss, ModelRequest, ModelResponse, ScriptedBackend
from .config import RunConfig, config_from_dict, load_config
from .errors import ProactiveError, SessionFailed
from .prompts import PromptPack
from .scenario import Scenario, compare_trace, load_scenario, make_machine

# RunConfig fields exposed as --kebab-case flags
_FLAGS = {
    "cooldown": float,
    "window_len": int,
    "search_k": int,
    "memory_path": str,
    "memory_k": int,
    "verbosity": str,
    "injection_budget": int,
    "sink": str,
    "sink_path": str,
    "rate": float,
    "planner": str,
    "user_id": str,
    "user_role": str,
    "max_workers": int,
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig overrides")
    for name, typ in _FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--personalization", action=argparse.BooleanOptionalAction, default=None)


def _resolve_config(scenario: Scenario, args: argparse.Namespace) -> RunConfig:
    cfg = scenario.run_config()
    if args.config:
        cfg = load_config(args.config, cfg)
    flags = {name: getattr(args, name) for name in (*_FLAGS, "personalization")}
    flags = {k: v for k, v in flags.items() if v is not None}
    if flags:
        cfg = config_from_dict(flags, cfg, Path.cwd())
    return cfg


def _replay(scenario: Scenario, cfg: RunConfig):
    try:
        return make_machine(scenario, cfg).run_session(scenario.events), None
    except SessionFailed as exc:
        return exc.trace, exc


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    trace, failure = _replay(scenario, _resolve_config(scenario, args))
    text = trace.serialize()
    if args.trace_out:
        Path(args.trace_out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if failure is not None:
        print(f"session failed: {failure}", file=sys.stderr)
        return 2
    return 0


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    if not scenario.expected:
        print(f"{scenario.name}: scenario names no expected trace", file=sys.stderr)
        return 2
    trace, failure = _replay(scenario, _resolve_config(scenario, args))
    report = compare_trace(trace, scenario.resolve(scenario.expected))
    print(report.render())
    if failure is not None:
        print(f"session failed: {failure}", file=sys.stderr)
    return report.exit_status


def cmd_record_golden(args) -> int:
    scenario = load_scenario(args.scenario)
    if not scenario.expected and not args.out:
        print(f"{scenario.name}: no expected path; pass --out", file=sys.stderr)
        return 2
    trace, failure = _replay(scenario, _resolve_config(scenario, args))
    if failure is not None:
        print(f"session failed, golden not written: {failure}", file=sys.stderr)
        return 2
    target = Path(args.out) if args.out else scenario.resolve(scenario.expected)
    target.write_text(trace.serialize(), encoding="utf-8")
    print(f"wrote {len(trace)} entries to {target}")
    return 0


class _MissTracker:
    def __init__(self, inner) -> None:
        self.inner = inner
        self.misses: list[str] = []

    def complete(self, request: ModelRequest) -> ModelResponse:
        try:
            return self.inner.complete(request)
        except FixtureMiss as exc:
            self.misses.append(str(exc))
            raise


def validate_fixtures(scenario: Scenario) -> list[str]:
    """Schema-check every fixture file, then replay and collect fixture misses."""
    problems: list[str] = []
    try:
        PromptPack.load(scenario.resolve(scenario.prompt_pack))
    except (ValueError, KeyError, TypeError) as exc:
        problems.append(f"prompt pack: {exc}")
    try:
        FixtureSearchProvider.from_file(scenario.resolve(scenario.search_fixtures))
    except (ValueError, KeyError, TypeError) as exc:
        problems.append(f"search fixtures: {exc}")
    try:
        scripted = ScriptedBackend.from_file(scenario.resolve(scenario.model_fixtures))
        for pid, entry in scripted.fixtures.items():
            if not isinstance(entry, dict) or not isinstance(entry.get("cases", {}), dict):
                problems.append(f"model fixtures: {pid}: expected {{'default'?, 'cases'}}")
    except ValueError as exc:
        problems.append(f"model fixtures: {exc}")
    if problems:
        return problems
    tracker = _MissTracker(scripted)
    slots = BackendSlots(trigger=tracker, streaming=tracker, orchestrator=tracker)
    cfg = dataclasses.replace(scenario.run_config(), memory_path=None, sink_path=None)
    try:
        make_machine(scenario, cfg, backends=slots).run_session(scenario.events)
    except SessionFailed as exc:
        problems.append(f"replay failed: {exc}")
    problems.extend(f"fixture miss: {m}" for m in tracker.misses)
    return problems


def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    problems = validate_fixtures(scenario)
    for p in problems:
        print(p)
    print(f"{scenario.name}: {'ok' if not problems else f'{len(problems)} problem(s)'}")
    return 0 if not problems else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proactive", description="Replay proactive-assistant scenarios")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a scenario and emit its trace")
    p.add_argument("scenario", help="scenario file or bundled name (blackjack, museum, retail)")
    p.add_argument("--trace-out", help="write the trace here instead of stdout")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="replay and diff against the scenario's golden trace")
    p.add_argument("scenario")
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("record-golden", help="replay and store the trace as the golden")
    p.add_argument("scenario")
    p.add_argument("--out", help="golden path (defaults to the scenario's expected path)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_record_golden)

    p = sub.add_parser("validate-fixtures", help="check fixture files and replay for fixture misses")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProactiveError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
