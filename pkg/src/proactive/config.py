"""Run configuration."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .backends import BackendSpec, spec_from_dict, spec_to_dict
from .input_unit import TriggerPolicy
from .output_unit import SinkKind, Verbosity


@dataclass(frozen=True)
class SearchConfig:
    """Fixture table for replays, or a live endpoint whose secrets live in named env vars."""

    fixture_path: str | None = None
    live: bool = False
    endpoint: str = "https://www.googleapis.com/customsearch/v1"
    key_env: str = "SEARCH_API_KEY"
    engine_env: str | None = "SEARCH_ENGINE_ID"
    timeout: float = 10.0


@dataclass(frozen=True)
class RunConfig:
    trigger: BackendSpec | None = None
    streaming: BackendSpec | None = None
    orchestrator: BackendSpec | None = None
    policy: TriggerPolicy = field(default_factory=TriggerPolicy)
    cooldown: float = 3.0
    window_len: int = 8
    personalization: bool = False
    search_k: int = 3
    search: SearchConfig = field(default_factory=SearchConfig)
    memory_path: str | None = None
    memory_k: int = 3
    verbosity: Verbosity = Verbosity.BRIEF
    injection_budget: int = 1200
    sink: SinkKind = SinkKind.TEXT_LOG
    sink_path: str | None = None
    rate: float = 20.0
    describe_prompt_id: str = "describe.blackjack"
    planner: str = "model"
    user_id: str = "user"
    user_role: str = "wearer"
    interrupt_markers: tuple[str, ...] = ("stop",)
    clock_origin: str = "2025-01-01T00:00:00Z"
    max_workers: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "verbosity", Verbosity(self.verbosity))
        object.__setattr__(self, "sink", SinkKind(self.sink))
        object.__setattr__(self, "interrupt_markers", tuple(self.interrupt_markers))
        for name in ("window_len", "search_k", "memory_k", "max_workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.injection_budget < 0:
            raise ValueError("injection_budget must be >= 0")
        if self.cooldown < 0:
            raise ValueError("cooldown must be >= 0")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.planner not in ("model", "rules"):
            raise ValueError("planner must be 'model' or 'rules'")
        # the policy's cooldown always follows the run-level setting
        if self.policy.cooldown != self.cooldown:
            object.__setattr__(self, "policy", dataclasses.replace(self.policy, cooldown=self.cooldown))

    # ---------------------------------------------------------------- (de)serialization

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name in ("trigger", "streaming", "orchestrator"):
                out[f.name] = spec_to_dict(value) if value is not None else None
            elif f.name in ("policy", "search"):
                d = dataclasses.asdict(value)
                out[f.name] = {k: (v.value if hasattr(v, "value") else v) for k, v in d.items()}
                if f.name == "policy":
                    out[f.name]["command_markers"] = list(value.command_markers)
                    del out[f.name]["cooldown"]
            elif hasattr(value, "value"):
                out[f.name] = value.value
            elif isinstance(value, tuple):
                out[f.name] = list(value)
            else:
                out[f.name] = value
        return out


def _resolve(path: str | None, base_dir: Path | None) -> str | None:
    if path is None or base_dir is None or Path(path).is_absolute():
        return path
    return str((base_dir / path).resolve())


def config_from_dict(data: dict[str, Any], base: RunConfig | None = None, base_dir: Path | None = None) -> RunConfig:
    """Overlay ``data`` on ``base``. Relative paths resolve against ``base_dir``."""
    base = base or RunConfig()
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    changes: dict[str, Any] = {}
    for key, value in data.items():
        if key in ("trigger", "streaming", "orchestrator"):
            changes[key] = spec_from_dict(value, base_dir) if value is not None else None
        elif key == "policy":
            merged = {**dataclasses.asdict(base.policy), **value}
            merged.pop("cooldown", None)
            changes[key] = TriggerPolicy(cooldown=data.get("cooldown", base.cooldown), **merged)
        elif key == "search":
            merged = {**dataclasses.asdict(base.search), **value}
            merged["fixture_path"] = _resolve(merged.get("fixture_path"), base_dir)
            changes[key] = SearchConfig(**merged)
        elif key in ("memory_path", "sink_path"):
            changes[key] = _resolve(value, base_dir)
        else:
            changes[key] = value
    return dataclasses.replace(base, **changes)


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh), base, path.parent)
