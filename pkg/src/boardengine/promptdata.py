"""Builders for the JSON payloads that prompt templates embed as variables.

Every multi-item payload uses a 1-based `idx` so provider replies can point
back at items without echoing ids. Items are sorted by id before indexing,
which keeps the rendered prompt (and therefore mock fixture matching and
replay) deterministic regardless of dict iteration quirks.
"""

from __future__ import annotations

import json
from typing import Iterable, Mapping

from .model import Note


def notes_payload(notes: Iterable[Note]) -> tuple[str, dict[int, str]]:
    """Render notes as a JSON array; returns (payload, idx -> NoteId)."""
    ordered = sorted(notes, key=lambda n: n.id)
    index: dict[int, str] = {}
    rows = []
    for i, note in enumerate(ordered, start=1):
        index[i] = note.id
        rows.append({"idx": i, "author": note.author, "text": note.text})
    return json.dumps(rows, ensure_ascii=False), index


def groups_payload(named: Iterable[tuple[str, str]]) -> str:
    """Render (name, description) pairs for similarity/assignment prompts."""
    rows = [
        {"idx": i, "name": name, "description": description}
        for i, (name, description) in enumerate(named, start=1)
    ]
    return json.dumps(rows, ensure_ascii=False)


def transcript_payload(segments: Iterable[Mapping]) -> str:
    """Render transcript segments as a JSON array of indexed sentences."""
    rows = [
        {"idx": i, "text": seg["text"]}
        for i, seg in enumerate(segments, start=1)
    ]
    return json.dumps(rows, ensure_ascii=False)
