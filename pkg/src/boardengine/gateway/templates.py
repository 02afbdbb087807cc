"""Prompt template catalog: verbatim texts with {{placeholder}} slots.

Templates live as plain .txt files next to the package (templates/*.txt) so
the rendered prompt is exactly the file content with substitutions and
nothing else. Each template ends with the JSON shape the model must produce;
the parser in schemas.py enforces that same shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from ..errors import BadConfig, MissingPlaceholder, UnknownReference

TEMPLATE_IDS = (
    "relation-hints",
    "relation-expansion",
    "affinity-lenses",
    "affinity-assign",
    "group-name-similarity",
    "goal-decompose",
    "query-expand",
    "apply-suggestion",
    "group-discussion-hints",
    "key-info-extract",
    "relevant-idea-retrieve",
    "suggest-dimensions",
)

_PLACEHOLDER_RE = re.compile(r"\{\{([a-zA-Z][a-zA-Z0-9]*)\}\}")
_TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str
    placeholders: frozenset


_catalog: dict[str, PromptTemplate] = {}


def _load(template_id: str) -> PromptTemplate:
    cached = _catalog.get(template_id)
    if cached is not None:
        return cached
    path = _TEMPLATE_DIR / f"{template_id}.txt"
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BadConfig(f"template file missing: {path}") from exc
    template = PromptTemplate(
        id=template_id,
        text=text,
        placeholders=frozenset(_PLACEHOLDER_RE.findall(text)),
    )
    _catalog[template_id] = template
    return template


def get_template(template_id: str) -> PromptTemplate:
    if template_id not in TEMPLATE_IDS:
        raise UnknownReference(f"no such template: {template_id}")
    return _load(template_id)


def render_prompt(template_id: str, variables: Mapping[str, str]) -> str:
    """Substitute placeholders verbatim; no other transformation."""
    template = get_template(template_id)
    missing = sorted(template.placeholders - set(variables))
    if missing:
        raise MissingPlaceholder(
            f"template {template_id} missing variables: {', '.join(missing)}"
        )

    def sub(match: re.Match) -> str:
        return str(variables[match.group(1)])

    return _PLACEHOLDER_RE.sub(sub, template.text)
