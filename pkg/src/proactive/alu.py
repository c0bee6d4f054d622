"""Tool execution: the search decision gate, tool-call parsing and web search."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .backends import ModelBackend, complete
from .errors import DuplicateTool, ProviderUnavailable, UnknownFixtureQuery, UnknownTool
from .prompts import PromptPack

WEB_SEARCH = "web_search"
DEFAULT_K = 3

# name("arg") with straight, escaped or curly quotes; a quote inside the argument ends it
_TOOL_CALL = re.compile(r'(?P<name>[A-Za-z_][A-Za-z0-9_]*)\(\s*\\?["“](?P<arg>[^"“”\\]*)\\?["”]\s*\)')


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    invoke: Callable[[str], str]


@dataclass(frozen=True)
class ToolCall:
    tool_name: str
    argument: str


@dataclass(frozen=True)
class SearchResultItem:
    topic: str
    summary: str
    snippets: str
    link: str

    def __post_init__(self) -> None:
        for name in ("topic", "summary", "snippets", "link"):
            if not getattr(self, name):
                raise ValueError(f"search result field {name!r} is empty")
        if not re.match(r"^[A-Za-z][A-Za-z0-9+.-]*://", self.link):
            raise ValueError(f"search result link has no scheme: {self.link!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "SearchResultItem":
        return cls(d["topic"], d["summary"], d["snippets"], d["link"])

    def to_dict(self) -> dict:
        return {"topic": self.topic, "summary": self.summary, "snippets": self.snippets, "link": self.link}


@dataclass(frozen=True)
class Answer:
    text: str


@dataclass(frozen=True)
class Search:
    query: str


SearchDecision = Answer | Search


# --------------------------------------------------------------------- parsing


def parse_tool_call(model_output: str) -> ToolCall | None:
    for m in _TOOL_CALL.finditer(model_output):
        if m.group("name") == WEB_SEARCH:
            return ToolCall(WEB_SEARCH, m.group("arg"))
    return None


def decide(query: str, backend: ModelBackend, prompts: PromptPack | None = None) -> SearchDecision:
    """Ask the model whether it can answer from its own knowledge or needs a web search."""
    if not query.strip():
        raise ValueError("decide needs a non-empty query")
    prompts = prompts or PromptPack.default()
    output = complete(backend, prompts.render("alu.decide", question=query)).text
    call = parse_tool_call(output)
    if call is None:
        return Answer(output.strip())
    return Search(call.argument)


# ------------------------------------------------------------------- formatting


def _clean(field: str) -> str:
    return field.replace("; ", "  ").replace("{", " ").replace("}", " ")


def format_results(items: list[SearchResultItem]) -> str:
    if not items:
        return "Search Results: (none)"
    parts = [
        f"{i}. {{{_clean(it.topic)}}}{{{_clean(it.summary)}}}{{{_clean(it.snippets)}}}{{{_clean(it.link)}}}"
        for i, it in enumerate(items, start=1)
    ]
    return "Search Results: " + "; ".join(parts)


_ITEM = re.compile(r"(\d+)\. \{([^{}]*)\}\{([^{}]*)\}\{([^{}]*)\}\{([^{}]*)\}")


def parse_results(text: str) -> list[SearchResultItem]:
    """Inverse of :func:`format_results` for brace-free fields."""
    prefix = "Search Results: "
    if not text.startswith(prefix):
        raise ValueError("not a search result block")
    rest = text[len(prefix):]
    if rest == "(none)":
        return []
    items = []
    pos = 0
    while True:
        m = _ITEM.match(rest, pos)
        if m is None or int(m.group(1)) != len(items) + 1:
            raise ValueError(f"malformed search results at offset {pos}")
        items.append(SearchResultItem(*m.group(2, 3, 4, 5)))
        pos = m.end()
        if pos == len(rest):
            return items
        if not rest.startswith("; ", pos):
            raise ValueError(f"expected '; ' at offset {pos}")
        pos += 2


# -------------------------------------------------------------------- providers


class SearchProvider(Protocol):
    def search(self, query: str) -> list[SearchResultItem]: ...


class FixtureSearchProvider:
    """Resolves queries by exact key against ``{query: [{topic, summary, snippets, link}]}``."""

    def __init__(self, table: dict[str, list[dict]]) -> None:
        self.table = {q: [SearchResultItem.from_dict(d) for d in items] for q, items in table.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureSearchProvider":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def search(self, query: str) -> list[SearchResultItem]:
        try:
            return list(self.table[query])
        except KeyError:
            raise UnknownFixtureQuery(query) from None


class LiveSearchProvider:
    """Google Programmable Search JSON API (or any endpoint returning the same ``items`` shape).

    Credentials come from environment variables named in the run config.
    """

    def __init__(
        self,
        endpoint: str,
        key_env: str,
        engine_env: str | None = None,
        timeout: float = 10.0,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.key_env = key_env
        self.engine_env = engine_env
        self.timeout = timeout
        self._transport = transport

    def search(self, query: str) -> list[SearchResultItem]:
        key = os.environ.get(self.key_env)
        if not key:
            raise ProviderUnavailable(f"environment variable {self.key_env} is not set")
        params = {"q": query, "key": key}
        if self.engine_env:
            engine = os.environ.get(self.engine_env)
            if not engine:
                raise ProviderUnavailable(f"environment variable {self.engine_env} is not set")
            params["cx"] = engine
        try:
            with httpx.Client(transport=self._transport, timeout=self.timeout) as client:
                resp = client.get(self.endpoint, params=params)
            resp.raise_for_status()
            payload = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise ProviderUnavailable(f"search failed: {type(exc).__name__}") from exc
        items = []
        for raw in payload.get("items", []):
            snippet = (raw.get("snippet") or "").strip()
            meta = (raw.get("pagemap", {}).get("metatags") or [{}])[0]
            summary = (meta.get("og:description") or snippet).strip()
            try:
                items.append(SearchResultItem(raw.get("title", "").strip(), summary, snippet, raw.get("link", "")))
            except ValueError:
                continue
        return items


def execute_search(provider: SearchProvider, query: str, k: int = DEFAULT_K) -> list[SearchResultItem]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return provider.search(query)[:k]


# --------------------------------------------------------------------- registry


class ToolRegistry:
    def __init__(self, tools: list[ToolSpec] | None = None) -> None:
        self._tools: dict[str, ToolSpec] = {}
        for tool in tools or []:
            self.register(tool)

    def register(self, tool: ToolSpec) -> None:
        if tool.name in self._tools:
            raise DuplicateTool(tool.name)
        self._tools[tool.name] = tool

    def get(self, name: str) -> ToolSpec:
        try:
            return self._tools[name]
        except KeyError:
            raise UnknownTool(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def names(self) -> list[str]:
        return list(self._tools)


def web_search_tool(provider: SearchProvider, k: int = DEFAULT_K) -> ToolSpec:
    return ToolSpec(
        WEB_SEARCH,
        "Search the web and return the top results",
        lambda query: format_results(execute_search(provider, query, k)),
    )


def invoke(registry: ToolRegistry, call: ToolCall) -> str:
    return registry.get(call.tool_name).invoke(call.argument)
