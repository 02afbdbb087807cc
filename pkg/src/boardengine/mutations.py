"""The single mutation path for workspace state.

``apply_mutation`` is a pure function: (state, mutation) -> (state', events).
Same inputs always produce the same output, so replaying a mutation log
reproduces the final state bit-for-bit in serialized form. Ids are assigned
by the sync layer before a mutation enters the log; by the time it reaches
this module every payload is canonical.

Payload keys are camelCase because payloads travel over the wire verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Optional

from .errors import (
    EmptyText,
    InvariantViolation,
    NoActiveRecording,
    NotASubgroup,
    RecordingAlreadyActive,
    UnknownReference,
)
from .model import (
    MAX_NOTE_TEXT_LEN,
    PAGE_MAIN,
    PROVENANCES,
    PROVENANCE_MANUAL,
    SCOPE_CUSTOMIZED,
    SCOPE_GLOBAL,
    SCOPE_SELECTED,
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
from .relations import is_valid_relation_type

# Mutation kinds (wire names)
CREATE_NOTE = "CreateNote"
EDIT_NOTE_TEXT = "EditNoteText"
MOVE_NOTE = "MoveNote"
DELETE_NOTE = "DeleteNote"
CREATE_GROUP = "CreateGroup"
RENAME_GROUP = "RenameGroup"
ASSIGN_NOTE_TO_GROUP = "AssignNoteToGroup"
REMOVE_NOTE_FROM_GROUP = "RemoveNoteFromGroup"
PROMOTE_SUBGROUP = "PromoteSubgroup"
DELETE_GROUP = "DeleteGroup"
SET_SETTINGS = "SetSettings"
INSTALL_LENS_PAGE = "InstallLensPage"
REPLACE_GROUPING = "ReplaceGrouping"
REPLACE_RELATION_HINTS = "ReplaceRelationHints"
SET_RECORDING = "SetRecording"

MUTATION_KINDS = frozenset(
    {
        CREATE_NOTE,
        EDIT_NOTE_TEXT,
        MOVE_NOTE,
        DELETE_NOTE,
        CREATE_GROUP,
        RENAME_GROUP,
        ASSIGN_NOTE_TO_GROUP,
        REMOVE_NOTE_FROM_GROUP,
        PROMOTE_SUBGROUP,
        DELETE_GROUP,
        SET_SETTINGS,
        INSTALL_LENS_PAGE,
        REPLACE_GROUPING,
        REPLACE_RELATION_HINTS,
        SET_RECORDING,
    }
)


@dataclass(frozen=True)
class Mutation:
    kind: str
    actor: str
    payload: dict

    def to_wire(self) -> dict:
        return {"kind": self.kind, "actor": self.actor, "payload": self.payload}

    @staticmethod
    def from_wire(doc: dict) -> "Mutation":
        if not isinstance(doc, dict):
            raise InvariantViolation("mutation must be an object")
        kind = doc.get("kind")
        actor = doc.get("actor")
        payload = doc.get("payload", {})
        if kind not in MUTATION_KINDS:
            raise InvariantViolation(f"unknown mutation kind: {kind!r}")
        if not isinstance(actor, str) or not actor:
            raise InvariantViolation("mutation actor must be a non-empty string")
        if not isinstance(payload, dict):
            raise InvariantViolation("mutation payload must be an object")
        return Mutation(kind=kind, actor=actor, payload=payload)


Event = dict


# --- payload field helpers ------------------------------------------------

def _str_field(payload: dict, key: str) -> str:
    v = payload.get(key)
    if not isinstance(v, str) or not v:
        raise InvariantViolation(f"missing or invalid field {key!r}")
    return v


def _any_str_field(payload: dict, key: str) -> str:
    v = payload.get(key)
    if not isinstance(v, str):
        raise InvariantViolation(f"missing or invalid field {key!r}")
    return v


def _num_field(payload: dict, key: str) -> float:
    v = payload.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise InvariantViolation(f"field {key!r} must be a finite number")
    return float(v)


def _note_text(payload: dict, key: str = "text") -> str:
    v = payload.get(key)
    if not isinstance(v, str):
        raise InvariantViolation(f"missing or invalid field {key!r}")
    if not v.strip():
        raise EmptyText("note text must be non-empty")
    if len(v) > MAX_NOTE_TEXT_LEN:
        raise InvariantViolation(f"note text exceeds {MAX_NOTE_TEXT_LEN} characters")
    return v


def _get_note(state: WorkspaceState, note_id: str) -> Note:
    note = state.notes.get(note_id)
    if note is None:
        raise UnknownReference(f"no such note: {note_id}")
    return note


def _get_group(state: WorkspaceState, group_id: str) -> TopicGroup:
    group = state.groups.get(group_id)
    if group is None:
        raise UnknownReference(f"no such group: {group_id}")
    return group


def _without_member(groups: dict, group_id: Optional[str], note_id: str) -> dict:
    if group_id is None or group_id not in groups:
        return groups
    g = groups[group_id]
    if note_id in g.member_notes:
        groups[group_id] = replace(
            g, member_notes=tuple(n for n in g.member_notes if n != note_id)
        )
    return groups


# --- handlers ---------------------------------------------------------------

def _create_note(state: WorkspaceState, actor: str, p: dict, rev: int):
    note_id = _str_field(p, "noteId")
    if note_id in state.notes:
        raise InvariantViolation(f"note id already in use: {note_id}")
    text = _note_text(p)
    x, y = _num_field(p, "x"), _num_field(p, "y")
    page = p.get("page", PAGE_MAIN)
    if not isinstance(page, str) or not state.page_exists(page):
        raise UnknownReference(f"no such page: {page}")
    provenance = p.get("provenance", PROVENANCE_MANUAL)
    if provenance not in PROVENANCES:
        raise InvariantViolation(f"invalid provenance: {provenance!r}")
    group_id = p.get("group")
    groups = dict(state.groups)
    if group_id is not None:
        group = _get_group(state, group_id)
        if group.page != page:
            raise InvariantViolation("note and group must live on the same page")
        groups[group_id] = replace(group, member_notes=group.member_notes + (note_id,))
    note = Note(
        id=note_id,
        author=actor,
        text=text,
        x=x,
        y=y,
        page=page,
        group=group_id,
        provenance=provenance,
        created_at_revision=rev,
        edited_at_revision=rev,
    )
    notes = dict(state.notes)
    notes[note_id] = note
    return replace(state, notes=notes, groups=groups), [
        {"event": "note-created", "noteId": note_id, "author": actor}
    ]


def _edit_note_text(state: WorkspaceState, actor: str, p: dict, rev: int):
    note = _get_note(state, _str_field(p, "noteId"))
    text = _note_text(p)
    notes = dict(state.notes)
    notes[note.id] = replace(note, text=text, edited_at_revision=rev)
    return replace(state, notes=notes), [
        {
            "event": "note-edited",
            "noteId": note.id,
            "originalText": note.text,
            "text": text,
        }
    ]


def _move_note(state: WorkspaceState, actor: str, p: dict, rev: int):
    note = _get_note(state, _str_field(p, "noteId"))
    x, y = _num_field(p, "x"), _num_field(p, "y")
    notes = dict(state.notes)
    notes[note.id] = replace(note, x=x, y=y)
    return replace(state, notes=notes), [
        {"event": "note-moved", "noteId": note.id, "x": x, "y": y}
    ]


def _delete_note(state: WorkspaceState, actor: str, p: dict, rev: int):
    note = _get_note(state, _str_field(p, "noteId"))
    notes = dict(state.notes)
    del notes[note.id]
    groups = _without_member(dict(state.groups), note.group, note.id)
    events: list[Event] = [{"event": "note-deleted", "noteId": note.id}]

    # purge from every lens page so no dangling reference survives
    lenses = dict(state.lenses)
    for lens_id in sorted(lenses):
        il = lenses[lens_id]
        if note.id in il.page.assignment:
            assignment = {k: v for k, v in il.page.assignment.items() if k != note.id}
            lenses[lens_id] = replace(il, page=replace(il.page, assignment=assignment))
            events.append({"event": "assignment-pruned", "lensId": lens_id, "noteId": note.id})

    hints = tuple(h for h in state.relation_hints if note.id not in (h.source, h.target))
    if len(hints) != len(state.relation_hints):
        events.append(
            {"event": "hints-pruned", "removed": len(state.relation_hints) - len(hints)}
        )
    return replace(state, notes=notes, groups=groups, lenses=lenses, relation_hints=hints), events


def _create_group(state: WorkspaceState, actor: str, p: dict, rev: int):
    group_id = _str_field(p, "groupId")
    if group_id in state.groups:
        raise InvariantViolation(f"group id already in use: {group_id}")
    title = _any_str_field(p, "title")
    page = p.get("page", PAGE_MAIN)
    if not isinstance(page, str) or not state.page_exists(page):
        raise UnknownReference(f"no such page: {page}")
    parent = p.get("parent")
    if parent is not None:
        parent_group = _get_group(state, parent)
        if parent_group.page != page:
            raise InvariantViolation("subgroup must live on its parent's page")
    x = _num_field(p, "x") if "x" in p else 0.0
    y = _num_field(p, "y") if "y" in p else 0.0
    rationale = p.get("rationale")
    if rationale is not None and not isinstance(rationale, str):
        raise InvariantViolation("rationale must be a string")
    group = TopicGroup(
        id=group_id, title=title, page=page, parent=parent, rationale=rationale, x=x, y=y
    )
    groups = dict(state.groups)
    groups[group_id] = group
    return replace(state, groups=groups), [
        {"event": "group-created", "groupId": group_id, "title": title}
    ]


def _rename_group(state: WorkspaceState, actor: str, p: dict, rev: int):
    group = _get_group(state, _str_field(p, "groupId"))
    title = _any_str_field(p, "title")
    groups = dict(state.groups)
    groups[group.id] = replace(group, title=title)
    return replace(state, groups=groups), [
        {"event": "group-renamed", "groupId": group.id, "title": title}
    ]


def _assign_note_to_group(state: WorkspaceState, actor: str, p: dict, rev: int):
    note = _get_note(state, _str_field(p, "noteId"))
    group = _get_group(state, _str_field(p, "groupId"))
    if note.page != group.page:
        raise InvariantViolation("note and group must live on the same page")
    previous = note.group
    if previous == group.id:
        return state, []
    groups = _without_member(dict(state.groups), previous, note.id)
    target = groups[group.id]
    if note.id not in target.member_notes:
        groups[group.id] = replace(target, member_notes=target.member_notes + (note.id,))
    notes = dict(state.notes)
    notes[note.id] = replace(note, group=group.id)
    return replace(state, notes=notes, groups=groups), [
        {
            "event": "note-assigned",
            "noteId": note.id,
            "groupId": group.id,
            "previousGroup": previous,
        }
    ]


def _remove_note_from_group(state: WorkspaceState, actor: str, p: dict, rev: int):
    note = _get_note(state, _str_field(p, "noteId"))
    if note.group is None:
        return state, []
    groups = _without_member(dict(state.groups), note.group, note.id)
    notes = dict(state.notes)
    notes[note.id] = replace(note, group=None)
    return replace(state, notes=notes, groups=groups), [
        {"event": "note-ungrouped", "noteId": note.id, "previousGroup": note.group}
    ]


def _promote_subgroup(state: WorkspaceState, actor: str, p: dict, rev: int):
    group = _get_group(state, _str_field(p, "groupId"))
    if group.parent is None:
        raise NotASubgroup(f"group {group.id} is already top-level")
    groups = dict(state.groups)
    groups[group.id] = replace(group, parent=None)
    return replace(state, groups=groups), [
        {"event": "group-promoted", "groupId": group.id, "previousParent": group.parent}
    ]


def _delete_group(state: WorkspaceState, actor: str, p: dict, rev: int):
    group = _get_group(state, _str_field(p, "groupId"))
    groups = dict(state.groups)
    del groups[group.id]
    notes = dict(state.notes)
    events: list[Event] = [{"event": "group-deleted", "groupId": group.id}]
    # members are orphaned, not deleted: notes are the primary artifact
    for note_id in group.member_notes:
        if note_id in notes:
            notes[note_id] = replace(notes[note_id], group=None)
            events.append({"event": "note-ungrouped", "noteId": note_id, "previousGroup": group.id})
    # subgroups climb one level rather than being destroyed
    for gid in sorted(groups):
        if groups[gid].parent == group.id:
            groups[gid] = replace(groups[gid], parent=group.parent)
            events.append(
                {"event": "group-reparented", "groupId": gid, "parent": group.parent}
            )
    return replace(state, notes=notes, groups=groups), events


_SETTINGS_KEYS = {
    "relationHintsEnabled": ("relation_hints_enabled", bool),
    "crossUserOnly": ("cross_user_only", bool),
    "hintRefreshIntervalMs": ("hint_refresh_interval_ms", int),
    "confidenceThreshold": ("confidence_threshold", float),
    "similarityThreshold": ("similarity_threshold", float),
    "relevanceThreshold": ("relevance_threshold", float),
    "maxHintsPerRefresh": ("max_hints_per_refresh", int),
}


def _set_settings(state: WorkspaceState, actor: str, p: dict, rev: int):
    changes = p.get("changes")
    if not isinstance(changes, dict) or not changes:
        raise InvariantViolation("SetSettings requires a non-empty changes object")
    kwargs = {}
    for key, value in changes.items():
        if key not in _SETTINGS_KEYS:
            raise InvariantViolation(f"unknown setting: {key!r}")
        attr, typ = _SETTINGS_KEYS[key]
        if typ is bool:
            if not isinstance(value, bool):
                raise InvariantViolation(f"setting {key} must be a boolean")
        elif typ is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise InvariantViolation(f"setting {key} must be an integer")
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvariantViolation(f"setting {key} must be a number")
            value = float(value)
        kwargs[attr] = value
    settings = replace(state.settings, **kwargs)
    try:
        settings.validate()
    except ValueError as exc:
        raise InvariantViolation(str(exc)) from exc
    events: list[Event] = [{"event": "settings-changed", "changes": dict(changes)}]
    hints = state.relation_hints
    if not settings.relation_hints_enabled and hints:
        hints = ()
        events.append({"event": "hints-cleared"})
    return replace(state, settings=settings, relation_hints=hints), events


def _parse_lens(doc: dict, rev: int) -> AffinityLens:
    if not isinstance(doc, dict):
        raise InvariantViolation("lens must be an object")
    affinities_doc = doc.get("affinities")
    if not isinstance(affinities_doc, list) or len(affinities_doc) < 2:
        raise InvariantViolation("a lens needs at least two affinities")
    affinities = []
    seen = set()
    for a in affinities_doc:
        if not isinstance(a, dict) or not isinstance(a.get("groupName"), str) or not a["groupName"]:
            raise InvariantViolation("each affinity needs a groupName")
        if a["groupName"] in seen:
            raise InvariantViolation(f"duplicate affinity name: {a['groupName']}")
        seen.add(a["groupName"])
        affinities.append(
            LensAffinity(group_name=a["groupName"], group_description=a.get("groupDescription", ""))
        )
    scope_doc = doc.get("scope") or {}
    kind = scope_doc.get("kind", SCOPE_GLOBAL)
    if kind not in (SCOPE_GLOBAL, SCOPE_SELECTED, SCOPE_CUSTOMIZED):
        raise InvariantViolation(f"invalid lens scope kind: {kind!r}")
    note_ids = scope_doc.get("noteIds") or []
    if not isinstance(note_ids, list) or not all(isinstance(n, str) for n in note_ids):
        raise InvariantViolation("scope noteIds must be a list of ids")
    scope = LensScope(kind=kind, note_ids=tuple(note_ids), instruction=scope_doc.get("instruction", ""))
    return AffinityLens(
        id=_str_field(doc, "id"),
        name=_str_field(doc, "name"),
        description=doc.get("description", ""),
        affinities=tuple(affinities),
        scope=scope,
        created_at_revision=rev,
        refinement_incomplete=bool(doc.get("refinementIncomplete", False)),
    )


def _clean_assignment(
    state: WorkspaceState, assignment_doc: Any, valid_groups: set[str]
) -> dict[str, Optional[str]]:
    """Validate an assignment map, dropping notes that vanished mid-flight."""
    if not isinstance(assignment_doc, dict):
        raise InvariantViolation("assignment must be an object")
    assignment: dict[str, Optional[str]] = {}
    for note_id in sorted(assignment_doc):
        value = assignment_doc[note_id]
        if note_id not in state.notes:
            continue  # deleted since the engine snapshotted; not an error
        if value is not None and value not in valid_groups:
            raise InvariantViolation(f"assignment references unknown affinity {value!r}")
        assignment[note_id] = value
    return assignment


def _install_lens_page(state: WorkspaceState, actor: str, p: dict, rev: int):
    lens = _parse_lens(p.get("lens"), rev)
    if lens.id in state.lenses:
        raise InvariantViolation(f"lens id already in use: {lens.id}")
    from .errors import DuplicateLensName

    for il in state.lenses.values():
        if il.lens.name == lens.name:
            raise DuplicateLensName(f"a lens named {lens.name!r} is already installed")
    valid = {a.group_name for a in lens.affinities}
    assignment = _clean_assignment(state, p.get("assignment", {}), valid)
    rationales = p.get("rationales", {})
    if not isinstance(rationales, dict):
        raise InvariantViolation("rationales must be an object")
    base_revision = p.get("baseRevision", state.revision)
    if not isinstance(base_revision, int):
        raise InvariantViolation("baseRevision must be an integer")
    page = LensPage(
        lens=lens.id,
        assignment=assignment,
        rationales={k: str(v) for k, v in sorted(rationales.items())},
        last_regroup_revision=base_revision,
    )
    lenses = dict(state.lenses)
    lenses[lens.id] = InstalledLens(lens=lens, page=page)
    return replace(state, lenses=lenses), [
        {"event": "lens-installed", "lensId": lens.id, "name": lens.name}
    ]


def _replace_grouping(state: WorkspaceState, actor: str, p: dict, rev: int):
    lens_id = _str_field(p, "lensId")
    il = state.lenses.get(lens_id)
    if il is None:
        raise UnknownReference(f"no such lens: {lens_id}")
    valid = {a.group_name for a in il.lens.affinities}
    assignment = _clean_assignment(state, p.get("assignment", {}), valid)
    rationales = p.get("rationales")
    if rationales is None:
        rationales = dict(il.page.rationales)
    if not isinstance(rationales, dict):
        raise InvariantViolation("rationales must be an object")
    base_revision = p.get("baseRevision", state.revision)
    if not isinstance(base_revision, int):
        raise InvariantViolation("baseRevision must be an integer")
    page = LensPage(
        lens=lens_id,
        assignment=assignment,
        rationales={k: str(v) for k, v in sorted(rationales.items())},
        last_regroup_revision=base_revision,
    )
    lenses = dict(state.lenses)
    lenses[lens_id] = replace(il, page=page)
    return replace(state, lenses=lenses), [
        {"event": "grouping-replaced", "lensId": lens_id}
    ]


def _replace_relation_hints(state: WorkspaceState, actor: str, p: dict, rev: int):
    hints_doc = p.get("hints")
    if not isinstance(hints_doc, list):
        raise InvariantViolation("hints must be a list")
    base_revision = p.get("baseRevision", state.revision)
    if not isinstance(base_revision, int):
        raise InvariantViolation("baseRevision must be an integer")
    threshold = state.settings.confidence_threshold
    kept: list[RelationHint] = []
    seen_pairs: set[frozenset[str]] = set()
    for doc in hints_doc:
        if not isinstance(doc, dict):
            raise InvariantViolation("each hint must be an object")
        source = _str_field(doc, "source")
        target = _str_field(doc, "target")
        rtype = _str_field(doc, "relationType")
        confidence = doc.get("confidence")
        if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
            raise InvariantViolation("hint confidence must be a number")
        confidence = float(confidence)
        if not 0.0 <= confidence <= 1.0:
            raise InvariantViolation("hint confidence must be in [0,1]")
        if source == target:
            raise InvariantViolation("a hint cannot relate a note to itself")
        if not is_valid_relation_type(rtype):
            raise InvariantViolation(f"relation type not in catalog: {rtype!r}")
        if source not in state.notes or target not in state.notes:
            continue  # note vanished mid-flight
        pair = frozenset((source, target))
        if pair in seen_pairs:
            raise InvariantViolation("duplicate hint for the same note pair")
        seen_pairs.add(pair)
        if confidence < threshold:
            continue
        kept.append(
            RelationHint(
                source=source,
                target=target,
                relation_type=rtype,
                explanation=str(doc.get("explanation", "")),
                confidence=confidence,
                generated_at_revision=base_revision,
            )
        )
    kept.sort(key=lambda h: (-h.confidence, h.source, h.target))
    kept = kept[: state.settings.max_hints_per_refresh]
    kept.sort(key=lambda h: (h.source, h.target, h.relation_type))
    return replace(state, relation_hints=tuple(kept)), [
        {"event": "hints-replaced", "count": len(kept)}
    ]


def _set_recording(state: WorkspaceState, actor: str, p: dict, rev: int):
    if "recordingId" not in p:
        raise InvariantViolation("SetRecording requires a recordingId field")
    recording_id = p["recordingId"]
    if recording_id is None:
        if state.active_recording is None:
            raise NoActiveRecording("no recording to stop")
        return replace(state, active_recording=None), [
            {"event": "recording-changed", "recordingId": None}
        ]
    if not isinstance(recording_id, str) or not recording_id:
        raise InvariantViolation("recordingId must be a non-empty string or null")
    if state.active_recording is not None:
        raise RecordingAlreadyActive(f"recording {state.active_recording} is active")
    return replace(state, active_recording=recording_id), [
        {"event": "recording-changed", "recordingId": recording_id}
    ]


_HANDLERS: dict[str, Callable] = {
    CREATE_NOTE: _create_note,
    EDIT_NOTE_TEXT: _edit_note_text,
    MOVE_NOTE: _move_note,
    DELETE_NOTE: _delete_note,
    CREATE_GROUP: _create_group,
    RENAME_GROUP: _rename_group,
    ASSIGN_NOTE_TO_GROUP: _assign_note_to_group,
    REMOVE_NOTE_FROM_GROUP: _remove_note_from_group,
    PROMOTE_SUBGROUP: _promote_subgroup,
    DELETE_GROUP: _delete_group,
    SET_SETTINGS: _set_settings,
    INSTALL_LENS_PAGE: _install_lens_page,
    REPLACE_GROUPING: _replace_grouping,
    REPLACE_RELATION_HINTS: _replace_relation_hints,
    SET_RECORDING: _set_recording,
}


def apply_mutation(state: WorkspaceState, m: Mutation) -> tuple[WorkspaceState, list[Event]]:
    """Apply one mutation, returning the next state and its events.

    Raises a BoardError subclass and leaves the input state untouched when
    the mutation is invalid. On success the revision advances by exactly 1
    and the actor joins the first-seen user roster.
    """
    handler = _HANDLERS.get(m.kind)
    if handler is None:
        raise InvariantViolation(f"unknown mutation kind: {m.kind!r}")
    if not isinstance(m.actor, str) or not m.actor:
        raise InvariantViolation("mutation actor must be a non-empty string")
    next_rev = state.revision + 1
    new_state, events = handler(state, m.actor, m.payload, next_rev)
    users = new_state.users
    if m.actor not in users:
        users = users + (m.actor,)
    return replace(new_state, revision=next_rev, users=users), events
