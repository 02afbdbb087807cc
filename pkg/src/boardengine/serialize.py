"""Canonical workspace document form.

Every replica that holds the same state must produce byte-identical output
from ``serialize_state``, so convergence can be checked by comparing strings
(or their sha256). The rules: formatVersion 1, camelCase keys, collections
emitted in sorted-id order, JSON with sorted keys and compact separators.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import replace
from typing import Optional

from .errors import CorruptSnapshot
from .model import (
    AffinityLens,
    InstalledLens,
    LensAffinity,
    LensPage,
    LensScope,
    Note,
    RelationHint,
    TopicGroup,
    WorkspaceSettings,
    WorkspaceState,
)

FORMAT_VERSION = 1


# --- state -> document ------------------------------------------------------

def _note_doc(n: Note) -> dict:
    return {
        "id": n.id,
        "author": n.author,
        "text": n.text,
        "x": float(n.x),
        "y": float(n.y),
        "page": n.page,
        "group": n.group,
        "provenance": n.provenance,
        "createdAtRevision": n.created_at_revision,
        "editedAtRevision": n.edited_at_revision,
    }


def _group_doc(g: TopicGroup) -> dict:
    return {
        "id": g.id,
        "title": g.title,
        "page": g.page,
        "parent": g.parent,
        "memberNotes": list(g.member_notes),
        "rationale": g.rationale,
        "x": float(g.x),
        "y": float(g.y),
    }


def _lens_doc(lens: AffinityLens) -> dict:
    return {
        "id": lens.id,
        "name": lens.name,
        "description": lens.description,
        "affinities": [
            {"groupName": a.group_name, "groupDescription": a.group_description}
            for a in lens.affinities
        ],
        "scope": {
            "kind": lens.scope.kind,
            "noteIds": list(lens.scope.note_ids),
            "instruction": lens.scope.instruction,
        },
        "createdAtRevision": lens.created_at_revision,
        "refinementIncomplete": lens.refinement_incomplete,
    }


def _installed_lens_doc(il: InstalledLens) -> dict:
    return {
        "lens": _lens_doc(il.lens),
        "page": {
            "assignment": {k: il.page.assignment[k] for k in sorted(il.page.assignment)},
            "rationales": {k: il.page.rationales[k] for k in sorted(il.page.rationales)},
            "lastRegroupRevision": il.page.last_regroup_revision,
        },
    }


def _hint_doc(h: RelationHint) -> dict:
    return {
        "source": h.source,
        "target": h.target,
        "relationType": h.relation_type,
        "explanation": h.explanation,
        "confidence": float(h.confidence),
        "generatedAtRevision": h.generated_at_revision,
    }


def _settings_doc(s: WorkspaceSettings) -> dict:
    return {
        "relationHintsEnabled": s.relation_hints_enabled,
        "crossUserOnly": s.cross_user_only,
        "hintRefreshIntervalMs": s.hint_refresh_interval_ms,
        "confidenceThreshold": s.confidence_threshold,
        "similarityThreshold": s.similarity_threshold,
        "relevanceThreshold": s.relevance_threshold,
        "maxHintsPerRefresh": s.max_hints_per_refresh,
    }


def state_to_doc(state: WorkspaceState) -> dict:
    hints = sorted(state.relation_hints, key=lambda h: (h.source, h.target, h.relation_type))
    return {
        "formatVersion": FORMAT_VERSION,
        "id": state.id,
        "revision": state.revision,
        "users": list(state.users),
        "notes": {nid: _note_doc(state.notes[nid]) for nid in sorted(state.notes)},
        "groups": {gid: _group_doc(state.groups[gid]) for gid in sorted(state.groups)},
        "lenses": {
            lid: _installed_lens_doc(state.lenses[lid]) for lid in sorted(state.lenses)
        },
        "relationHints": [_hint_doc(h) for h in hints],
        "settings": _settings_doc(state.settings),
        "activeRecording": state.active_recording,
    }


# --- document -> state ------------------------------------------------------

def _require(doc: dict, key: str, kinds) -> object:
    if key not in doc:
        raise CorruptSnapshot(f"document missing field {key!r}")
    v = doc[key]
    if not isinstance(v, kinds):
        raise CorruptSnapshot(f"field {key!r} has the wrong type")
    return v


def _note_from_doc(doc: dict) -> Note:
    return Note(
        id=str(_require(doc, "id", str)),
        author=str(_require(doc, "author", str)),
        text=str(_require(doc, "text", str)),
        x=float(_require(doc, "x", (int, float))),
        y=float(_require(doc, "y", (int, float))),
        page=str(_require(doc, "page", str)),
        group=doc.get("group"),
        provenance=str(_require(doc, "provenance", str)),
        created_at_revision=int(_require(doc, "createdAtRevision", int)),
        edited_at_revision=int(doc.get("editedAtRevision", doc.get("createdAtRevision", 0))),
    )


def _group_from_doc(doc: dict) -> TopicGroup:
    members = _require(doc, "memberNotes", list)
    return TopicGroup(
        id=str(_require(doc, "id", str)),
        title=str(_require(doc, "title", str)),
        page=str(_require(doc, "page", str)),
        parent=doc.get("parent"),
        member_notes=tuple(str(m) for m in members),
        rationale=doc.get("rationale"),
        x=float(doc.get("x", 0.0)),
        y=float(doc.get("y", 0.0)),
    )


def _lens_from_doc(doc: dict) -> AffinityLens:
    affinities = tuple(
        LensAffinity(group_name=str(a["groupName"]), group_description=str(a.get("groupDescription", "")))
        for a in _require(doc, "affinities", list)
    )
    scope_doc = doc.get("scope") or {}
    scope = LensScope(
        kind=str(scope_doc.get("kind", "global")),
        note_ids=tuple(str(n) for n in scope_doc.get("noteIds", [])),
        instruction=str(scope_doc.get("instruction", "")),
    )
    return AffinityLens(
        id=str(_require(doc, "id", str)),
        name=str(_require(doc, "name", str)),
        description=str(doc.get("description", "")),
        affinities=affinities,
        scope=scope,
        created_at_revision=int(doc.get("createdAtRevision", 0)),
        refinement_incomplete=bool(doc.get("refinementIncomplete", False)),
    )


def _installed_lens_from_doc(doc: dict) -> InstalledLens:
    lens = _lens_from_doc(_require(doc, "lens", dict))
    page_doc = _require(doc, "page", dict)
    assignment_doc = _require(page_doc, "assignment", dict)
    assignment = {str(k): (None if v is None else str(v)) for k, v in assignment_doc.items()}
    rationales = {str(k): str(v) for k, v in page_doc.get("rationales", {}).items()}
    page = LensPage(
        lens=lens.id,
        assignment=assignment,
        rationales=rationales,
        last_regroup_revision=int(page_doc.get("lastRegroupRevision", 0)),
    )
    return InstalledLens(lens=lens, page=page)


def _hint_from_doc(doc: dict) -> RelationHint:
    return RelationHint(
        source=str(_require(doc, "source", str)),
        target=str(_require(doc, "target", str)),
        relation_type=str(_require(doc, "relationType", str)),
        explanation=str(doc.get("explanation", "")),
        confidence=float(_require(doc, "confidence", (int, float))),
        generated_at_revision=int(doc.get("generatedAtRevision", 0)),
    )


def _settings_from_doc(doc: dict) -> WorkspaceSettings:
    defaults = WorkspaceSettings()
    return WorkspaceSettings(
        relation_hints_enabled=bool(doc.get("relationHintsEnabled", defaults.relation_hints_enabled)),
        cross_user_only=bool(doc.get("crossUserOnly", defaults.cross_user_only)),
        hint_refresh_interval_ms=int(doc.get("hintRefreshIntervalMs", defaults.hint_refresh_interval_ms)),
        confidence_threshold=float(doc.get("confidenceThreshold", defaults.confidence_threshold)),
        similarity_threshold=float(doc.get("similarityThreshold", defaults.similarity_threshold)),
        relevance_threshold=float(doc.get("relevanceThreshold", defaults.relevance_threshold)),
        max_hints_per_refresh=int(doc.get("maxHintsPerRefresh", defaults.max_hints_per_refresh)),
    )


def doc_to_state(doc: dict) -> WorkspaceState:
    if not isinstance(doc, dict):
        raise CorruptSnapshot("document must be an object")
    version = doc.get("formatVersion")
    if version != FORMAT_VERSION:
        raise CorruptSnapshot(f"unsupported formatVersion: {version!r}")
    notes_doc = _require(doc, "notes", dict)
    groups_doc = _require(doc, "groups", dict)
    lenses_doc = doc.get("lenses", {})
    notes = {}
    for nid, nd in notes_doc.items():
        note = _note_from_doc(nd)
        if note.id != nid:
            raise CorruptSnapshot(f"note key {nid!r} does not match its id")
        notes[nid] = note
    groups = {}
    for gid, gd in groups_doc.items():
        group = _group_from_doc(gd)
        if group.id != gid:
            raise CorruptSnapshot(f"group key {gid!r} does not match its id")
        groups[gid] = group
    lenses = {}
    for lid, ld in lenses_doc.items():
        il = _installed_lens_from_doc(ld)
        if il.lens.id != lid:
            raise CorruptSnapshot(f"lens key {lid!r} does not match its id")
        lenses[lid] = il
    state = WorkspaceState(
        id=str(_require(doc, "id", str)),
        revision=int(_require(doc, "revision", int)),
        users=tuple(str(u) for u in doc.get("users", [])),
        notes=notes,
        groups=groups,
        lenses=lenses,
        relation_hints=tuple(_hint_from_doc(h) for h in doc.get("relationHints", [])),
        settings=_settings_from_doc(doc.get("settings", {})),
        active_recording=doc.get("activeRecording"),
    )
    _check_integrity(state)
    return state


def _check_integrity(state: WorkspaceState) -> None:
    for note in state.notes.values():
        if note.group is not None:
            group = state.groups.get(note.group)
            if group is None:
                raise CorruptSnapshot(f"note {note.id} references missing group {note.group}")
            if note.id not in group.member_notes:
                raise CorruptSnapshot(f"group {group.id} does not list member {note.id}")
    for group in state.groups.values():
        if group.parent is not None and group.parent not in state.groups:
            raise CorruptSnapshot(f"group {group.id} references missing parent {group.parent}")
        for member in group.member_notes:
            note = state.notes.get(member)
            if note is None or note.group != group.id:
                raise CorruptSnapshot(f"group {group.id} lists stale member {member}")
    for hint in state.relation_hints:
        if hint.source not in state.notes or hint.target not in state.notes:
            raise CorruptSnapshot("relation hint references a missing note")


# --- canonical strings ------------------------------------------------------

def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def serialize_state(state: WorkspaceState) -> str:
    return canonical_json(state_to_doc(state))


def deserialize_state(text: str) -> WorkspaceState:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"not valid JSON: {exc}") from exc
    return doc_to_state(doc)


def content_digest(state: WorkspaceState) -> str:
    """Digest of workspace content, ignoring revision and recording status.

    Two workspaces with the same notes, groups, lenses, hints, and settings
    share a digest even if they got there through different histories.
    """
    doc = state_to_doc(state)
    del doc["revision"]
    del doc["activeRecording"]
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def state_digest(state: WorkspaceState) -> str:
    """Digest of the full serialized state, revision included."""
    return hashlib.sha256(serialize_state(state).encode("utf-8")).hexdigest()
