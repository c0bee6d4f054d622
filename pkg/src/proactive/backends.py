"""Model-call boundary.

Every unit talks to a language model through :func:`complete`. Two
implementations ship: :class:`ScriptedBackend` replays fixture text keyed by
``(prompt_id, content hash)`` and :class:`RemoteBackend` performs one
chat-completion exchange over HTTP.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import (
    BackendFailure,
    FixtureMiss,
    NonSuccessStatus,
    Timeout,
    TransportFailure,
)


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"


@dataclass(frozen=True)
class Message:
    role: Role
    content: str


@dataclass(frozen=True)
class ModelRequest:
    prompt_id: str
    messages: tuple[Message, ...]
    max_length: int = 512

    def __post_init__(self) -> None:
        if not any(m.role is Role.USER for m in self.messages):
            raise ValueError(f"request {self.prompt_id!r} has no user message")

    @property
    def content_hash(self) -> str:
        return content_hash(m.content for m in self.messages)


@dataclass(frozen=True)
class ModelResponse:
    text: str
    latency: float = 0.0


def content_hash(contents) -> str:
    """Fixture key for a request: sha256 of the concatenated message contents, 16 hex chars."""
    return hashlib.sha256("".join(contents).encode("utf-8")).hexdigest()[:16]


# --------------------------------------------------------------------------- specs


@dataclass(frozen=True)
class Scripted:
    fixture_path: str


@dataclass(frozen=True)
class Remote:
    endpoint: str
    model: str
    credential_env: str | None = None
    timeout: float = 30.0
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"


BackendSpec = Scripted | Remote


def spec_from_dict(data: dict, base_dir: Path | None = None) -> BackendSpec:
    kind = data.get("kind", "scripted")
    if kind == "scripted":
        path = data["fixture_path"]
        if base_dir is not None and not os.path.isabs(path):
            path = str((base_dir / path).resolve())
        return Scripted(path)
    if kind == "remote":
        return Remote(
            endpoint=data["endpoint"],
            model=data["model"],
            credential_env=data.get("credential_env"),
            timeout=float(data.get("timeout", 30.0)),
            auth_header=data.get("auth_header", "Authorization"),
            auth_scheme=data.get("auth_scheme", "Bearer"),
        )
    raise ValueError(f"unknown backend kind {kind!r}")


def spec_to_dict(spec: BackendSpec) -> dict:
    if isinstance(spec, Scripted):
        return {"kind": "scripted", "fixture_path": spec.fixture_path}
    return {
        "kind": "remote",
        "endpoint": spec.endpoint,
        "model": spec.model,
        "credential_env": spec.credential_env,
        "timeout": spec.timeout,
        "auth_header": spec.auth_header,
        "auth_scheme": spec.auth_scheme,
    }


# --------------------------------------------------------------------- backends


class ModelBackend(Protocol):
    def complete(self, request: ModelRequest) -> ModelResponse: ...


class ScriptedBackend:
    """Pure fixture replay.

    Fixture layout: ``{prompt_id: {"default": text?, "cases": {hash: text}}}``.
    """

    def __init__(self, fixtures: dict[str, dict]) -> None:
        self.fixtures = fixtures

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def with_defaults(self, defaults: dict[str, str]) -> "ScriptedBackend":
        merged = {pid: dict(entry) for pid, entry in self.fixtures.items()}
        for pid, text in defaults.items():
            merged.setdefault(pid, {"cases": {}})["default"] = text
        return ScriptedBackend(merged)

    def complete(self, request: ModelRequest) -> ModelResponse:
        entry = self.fixtures.get(request.prompt_id, {})
        key = request.content_hash
        cases = entry.get("cases", {})
        if key in cases:
            return ModelResponse(cases[key], 0.0)
        if entry.get("default") is not None:
            return ModelResponse(entry["default"], 0.0)
        raise FixtureMiss(f"no fixture for ({request.prompt_id}, {key}) and no default")


class CallbackBackend:
    """Wraps a plain function; handy for authoring fixtures and for tests."""

    def __init__(self, fn: Callable[[ModelRequest], str]) -> None:
        self.fn = fn

    def complete(self, request: ModelRequest) -> ModelResponse:
        return ModelResponse(self.fn(request), 0.0)


class FixtureRecorder:
    """Records every exchange passing through ``inner`` in scripted-fixture layout."""

    def __init__(self, inner: ModelBackend) -> None:
        self.inner = inner
        self.fixtures: dict[str, dict] = {}
        self._lock = threading.Lock()

    def complete(self, request: ModelRequest) -> ModelResponse:
        response = self.inner.complete(request)
        with self._lock:
            entry = self.fixtures.setdefault(request.prompt_id, {"cases": {}})
            entry["cases"][request.content_hash] = response.text
        return response

    def merge_into(self, fixtures: dict[str, dict]) -> dict[str, dict]:
        for pid, entry in self.fixtures.items():
            target = fixtures.setdefault(pid, {"cases": {}})
            target.setdefault("cases", {}).update(entry["cases"])
        return fixtures


class RemoteBackend:
    """One chat-completion exchange per call, no implicit retries."""

    def __init__(self, spec: Remote, transport: httpx.BaseTransport | None = None) -> None:
        self.spec = spec
        self._transport = transport

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.spec.credential_env:
            value = os.environ.get(self.spec.credential_env)
            if not value:
                raise TransportFailure(f"credential variable {self.spec.credential_env} is not set")
            headers[self.spec.auth_header] = f"{self.spec.auth_scheme} {value}".strip()
        return headers

    def complete(self, request: ModelRequest) -> ModelResponse:
        payload = {
            "model": self.spec.model,
            "messages": [{"role": m.role.value, "content": m.content} for m in request.messages],
            "max_tokens": request.max_length,
        }
        start = time.monotonic()
        try:
            with httpx.Client(transport=self._transport, timeout=self.spec.timeout) as client:
                resp = client.post(self.spec.endpoint, json=payload, headers=self._headers())
        except httpx.TimeoutException as exc:
            raise Timeout(f"{request.prompt_id}: timed out after {self.spec.timeout}s") from exc
        except httpx.HTTPError as exc:
            # the message never includes header values
            raise TransportFailure(f"{request.prompt_id}: {type(exc).__name__}") from exc
        if resp.status_code // 100 != 2:
            raise NonSuccessStatus(resp.status_code, resp.text)
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportFailure(f"{request.prompt_id}: unexpected response shape") from exc
        return ModelResponse(text or "", time.monotonic() - start)


def make_backend(spec: BackendSpec, transport: httpx.BaseTransport | None = None) -> ModelBackend:
    if isinstance(spec, Scripted):
        return ScriptedBackend.from_file(spec.fixture_path)
    return RemoteBackend(spec, transport=transport)


def complete(backend: ModelBackend, request: ModelRequest) -> ModelResponse:
    """Run one completion, normalizing stray exceptions to :class:`BackendFailure`."""
    try:
        return backend.complete(request)
    except BackendFailure:
        raise
    except Exception as exc:  # noqa: BLE001 - third-party backends raise anything
        raise BackendFailure(f"{request.prompt_id}: {exc}") from exc


@dataclass
class BackendSlots:
    """The three model roles: always-on trigger, on-demand streaming describer, orchestrator."""

    trigger: ModelBackend
    streaming: ModelBackend
    orchestrator: ModelBackend
