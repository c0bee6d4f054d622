"""Prompt packs: named templates rendered into :class:`ModelRequest` objects.

A pack is a JSON object ``{prompt_id: {"system": str?, "user": str, "max_length": int?}}``.
Templates use ``$name`` placeholders (:class:`string.Template`) so that literal
braces in search results or JSON snippets need no escaping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template

from .backends import Message, ModelRequest, Role
from .errors import UnknownPrompt

DEFAULT_PACK = "prompts.json"


@dataclass(frozen=True)
class PromptTemplate:
    user: str
    system: str | None = None
    max_length: int = 512


class PromptPack:
    def __init__(self, templates: dict[str, PromptTemplate]) -> None:
        self.templates = templates

    @classmethod
    def from_dict(cls, data: dict) -> "PromptPack":
        templates = {}
        for pid, entry in data.items():
            if "user" not in entry:
                raise ValueError(f"prompt {pid!r} has no user template")
            templates[pid] = PromptTemplate(
                user=entry["user"],
                system=entry.get("system"),
                max_length=int(entry.get("max_length", 512)),
            )
        return cls(templates)

    @classmethod
    def load(cls, path: str | Path) -> "PromptPack":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "PromptPack":
        text = resources.files("proactive.scenarios").joinpath(DEFAULT_PACK).read_text("utf-8")
        return cls.from_dict(json.loads(text))

    def __contains__(self, prompt_id: str) -> bool:
        return prompt_id in self.templates

    def render(self, prompt_id: str, **values: object) -> ModelRequest:
        try:
            tpl = self.templates[prompt_id]
        except KeyError:
            raise UnknownPrompt(prompt_id) from None
        values = {k: str(v) for k, v in values.items()}
        messages = []
        if tpl.system:
            messages.append(Message(Role.SYSTEM, Template(tpl.system).substitute(values)))
        messages.append(Message(Role.USER, Template(tpl.user).substitute(values)))
        return ModelRequest(prompt_id, tuple(messages), tpl.max_length)


def fmt_t(t: float) -> str:
    return f"{t:.3f}"
