"""Parsing and validation of structured model output.

The provider replies with free text that should contain one JSON document
matching the shape echoed at the end of the prompt. This module digs the
JSON out of the text and validates it per template: field names, types, and
score ranges. A score outside [0,1] is MalformedOutput, never clamped.

The prompt tables the templates derive from never pin down the reply
schemas, so the shapes here are this project's own reconstruction; each
validator documents the shape it enforces.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from ..errors import MalformedOutput


# --- JSON extraction --------------------------------------------------------

def extract_json(text: str) -> Any:
    """Pull the first JSON object or array out of a blob of model text."""
    if not isinstance(text, str) or not text.strip():
        raise MalformedOutput("empty provider output")
    stripped = text.strip()
    try:
        return json.loads(stripped)
    except json.JSONDecodeError:
        pass
    for start, opener, closer in _candidate_spans(stripped):
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(stripped)):
            ch = stripped[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == opener:
                depth += 1
            elif ch == closer:
                depth -= 1
                if depth == 0:
                    try:
                        return json.loads(stripped[start : i + 1])
                    except json.JSONDecodeError:
                        break
        # unbalanced or invalid: fall through to the next candidate
    raise MalformedOutput("no JSON document found in provider output")


def _candidate_spans(text: str):
    for i, ch in enumerate(text):
        if ch == "{":
            yield i, "{", "}"
        elif ch == "[":
            yield i, "[", "]"


# --- field validators --------------------------------------------------------

def _obj(value: Any, what: str) -> dict:
    if not isinstance(value, dict):
        raise MalformedOutput(f"{what} must be a JSON object")
    return value


def _list(value: Any, what: str) -> list:
    if not isinstance(value, list):
        raise MalformedOutput(f"{what} must be a JSON array")
    return value


def _text(value: Any, what: str, allow_empty: bool = False) -> str:
    if not isinstance(value, str):
        raise MalformedOutput(f"{what} must be a string")
    if not allow_empty and not value.strip():
        raise MalformedOutput(f"{what} must be non-empty")
    return value


def _score(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedOutput(f"{what} must be a number")
    score = float(value)
    if not 0.0 <= score <= 1.0:
        raise MalformedOutput(f"{what} must be between 0 and 1, got {value}")
    return score


def _index(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise MalformedOutput(f"{what} must be a positive 1-based integer")
    return value


# --- per-template shapes ------------------------------------------------------

def _parse_hints(value: Any) -> list[dict]:
    # {"hints": [{"text", "score"}]}
    doc = _obj(value, "reply")
    hints = []
    for i, h in enumerate(_list(doc.get("hints"), "hints")):
        item = _obj(h, f"hints[{i}]")
        hints.append(
            {
                "text": _text(item.get("text"), f"hints[{i}].text"),
                "score": _score(item.get("score"), f"hints[{i}].score"),
            }
        )
    return hints


def _parse_subtasks(value: Any) -> list[dict]:
    # {"subtasks": [{"title", "detail"}]}
    doc = _obj(value, "reply")
    subtasks = _list(doc.get("subtasks"), "subtasks")
    if not 1 <= len(subtasks) <= 20:
        raise MalformedOutput(f"expected 1..20 subtasks, got {len(subtasks)}")
    out = []
    for i, s in enumerate(subtasks):
        item = _obj(s, f"subtasks[{i}]")
        out.append(
            {
                "title": _text(item.get("title"), f"subtasks[{i}].title"),
                "detail": _text(item.get("detail", ""), f"subtasks[{i}].detail", allow_empty=True),
            }
        )
    return out


def _parse_revision(value: Any) -> str:
    # {"revision": "<text>"}
    doc = _obj(value, "reply")
    return _text(doc.get("revision"), "revision")


def _parse_relations(value: Any) -> list[dict]:
    # {"relations": [{"source", "target", "relationType", "explanation", "confidence"}]}
    doc = _obj(value, "reply")
    out = []
    for i, r in enumerate(_list(doc.get("relations"), "relations")):
        item = _obj(r, f"relations[{i}]")
        out.append(
            {
                "source": _index(item.get("source"), f"relations[{i}].source"),
                "target": _index(item.get("target"), f"relations[{i}].target"),
                "relationType": _text(item.get("relationType"), f"relations[{i}].relationType"),
                "explanation": _text(item.get("explanation", ""), f"relations[{i}].explanation", allow_empty=True),
                "confidence": _score(item.get("confidence"), f"relations[{i}].confidence"),
            }
        )
    return out


def _parse_lenses(value: Any) -> list[dict]:
    # {"lenses": [{"name", "description", "groups": [{"name", "description", "ideas"?}]}]}
    # per-idea "ideas"/"pre_topic" echoes are tolerated and dropped here
    doc = _obj(value, "reply")
    lenses = _list(doc.get("lenses"), "lenses")
    if len(lenses) < 2:
        raise MalformedOutput(f"expected at least 2 lens candidates, got {len(lenses)}")
    out = []
    for i, l in enumerate(lenses):
        item = _obj(l, f"lenses[{i}]")
        groups = _list(item.get("groups"), f"lenses[{i}].groups")
        if len(groups) < 2:
            raise MalformedOutput(f"lenses[{i}] needs at least 2 groups")
        parsed_groups = []
        for j, g in enumerate(groups):
            gd = _obj(g, f"lenses[{i}].groups[{j}]")
            parsed_groups.append(
                {
                    "name": _text(gd.get("name"), f"lenses[{i}].groups[{j}].name"),
                    "description": _text(
                        gd.get("description", ""), f"lenses[{i}].groups[{j}].description", allow_empty=True
                    ),
                }
            )
        out.append(
            {
                "name": _text(item.get("name"), f"lenses[{i}].name"),
                "description": _text(item.get("description", ""), f"lenses[{i}].description", allow_empty=True),
                "groups": parsed_groups,
            }
        )
    return out


def _parse_assignment(value: Any) -> dict:
    # {"assignment": [{"idx", "group"}], "rationales": {name: text}}
    doc = _obj(value, "reply")
    assignment = []
    for i, a in enumerate(_list(doc.get("assignment"), "assignment")):
        item = _obj(a, f"assignment[{i}]")
        group: Optional[str] = None
        if item.get("group") is not None:
            group = _text(item.get("group"), f"assignment[{i}].group")
        assignment.append({"idx": _index(item.get("idx"), f"assignment[{i}].idx"), "group": group})
    rationales_doc = doc.get("rationales", {})
    rationales = {
        _text(k, "rationale key"): _text(v, f"rationales[{k}]", allow_empty=True)
        for k, v in _obj(rationales_doc, "rationales").items()
    }
    return {"assignment": assignment, "rationales": rationales}


def _parse_similarity(value: Any) -> dict:
    # {"pairs": [{"a", "b", "similarity"}], "renames": {old: new}}
    doc = _obj(value, "reply")
    pairs = []
    for i, p in enumerate(_list(doc.get("pairs"), "pairs")):
        item = _obj(p, f"pairs[{i}]")
        pairs.append(
            {
                "a": _text(item.get("a"), f"pairs[{i}].a"),
                "b": _text(item.get("b"), f"pairs[{i}].b"),
                "similarity": _score(item.get("similarity"), f"pairs[{i}].similarity"),
            }
        )
    renames = {
        _text(k, "rename key"): _text(v, f"renames[{k}]")
        for k, v in _obj(doc.get("renames", {}), "renames").items()
    }
    return {"pairs": pairs, "renames": renames}


def _parse_key_info(value: Any) -> list[dict]:
    # {"keyInfo": [{"summary", "relatedNote", "relevance", "segments"}]}
    doc = _obj(value, "reply")
    out = []
    for i, k in enumerate(_list(doc.get("keyInfo"), "keyInfo")):
        item = _obj(k, f"keyInfo[{i}]")
        related = item.get("relatedNote")
        if related is not None:
            related = _index(related, f"keyInfo[{i}].relatedNote")
        segments = [
            _index(s, f"keyInfo[{i}].segments[{j}]")
            for j, s in enumerate(_list(item.get("segments", []), f"keyInfo[{i}].segments"))
        ]
        out.append(
            {
                "summary": _text(item.get("summary"), f"keyInfo[{i}].summary"),
                "relatedNote": related,
                "relevance": _score(item.get("relevance"), f"keyInfo[{i}].relevance"),
                "segments": segments,
            }
        )
    return out


def _parse_relevant(value: Any) -> list[dict]:
    # {"relevant": [{"note", "sentence", "relevance"}]}
    doc = _obj(value, "reply")
    out = []
    for i, r in enumerate(_list(doc.get("relevant"), "relevant")):
        item = _obj(r, f"relevant[{i}]")
        out.append(
            {
                "note": _index(item.get("note"), f"relevant[{i}].note"),
                "sentence": _text(item.get("sentence"), f"relevant[{i}].sentence"),
                "relevance": _score(item.get("relevance"), f"relevant[{i}].relevance"),
            }
        )
    return out


def _parse_dimensions(value: Any) -> list[str]:
    # {"dimensions": ["<name>"]}
    doc = _obj(value, "reply")
    dims = _list(doc.get("dimensions"), "dimensions")
    if len(dims) < 2:
        raise MalformedOutput(f"expected at least 2 dimensions, got {len(dims)}")
    return [_text(d, f"dimensions[{i}]") for i, d in enumerate(dims)]


_PARSERS = {
    "relation-hints": _parse_relations,
    "relation-expansion": _parse_hints,
    "affinity-lenses": _parse_lenses,
    "affinity-assign": _parse_assignment,
    "group-name-similarity": _parse_similarity,
    "goal-decompose": _parse_subtasks,
    "query-expand": _parse_hints,
    "apply-suggestion": _parse_revision,
    "group-discussion-hints": _parse_hints,
    "key-info-extract": _parse_key_info,
    "relevant-idea-retrieve": _parse_relevant,
    "suggest-dimensions": _parse_dimensions,
}


def parse_structured(template_id: str, raw_text: str):
    """Extract and validate the JSON reply for one template."""
    parser = _PARSERS.get(template_id)
    if parser is None:
        raise MalformedOutput(f"no reply schema for template {template_id!r}")
    return parser(extract_json(raw_text))
