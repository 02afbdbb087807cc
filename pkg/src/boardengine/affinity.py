"""Affinity lenses: generation, name refinement, exclusive grouping, regroup.

A lens candidate is a plain dict until installed (name, description,
affinities, scope, refinementIncomplete). Generation and refinement run
against a state snapshot and call the provider; installation and every
assignment change are ordinary mutations through the hub, so exclusivity
and referential integrity are enforced in one place.
"""

from __future__ import annotations

import json
import logging
import threading
from typing import Optional

from .errors import EmptyDimensions, TooFewNotes, UnknownReference
from .model import (
    PAGE_MAIN,
    SCOPE_CUSTOMIZED,
    SCOPE_GLOBAL,
    SCOPE_SELECTED,
    AffinityLens,
    WorkspaceState,
)
from .promptdata import groups_payload, notes_payload

log = logging.getLogger(__name__)

MAX_LENSES = 5
MAX_REFINEMENT_PASSES = 5
MAX_DIMENSIONS = 6
ENGINE_ACTOR = "affinity-engine"


def parse_scope_doc(doc: Optional[dict]) -> dict:
    """Normalize a wire scope doc; defaults to global."""
    doc = doc or {}
    kind = doc.get("kind", SCOPE_GLOBAL)
    if kind not in (SCOPE_GLOBAL, SCOPE_SELECTED, SCOPE_CUSTOMIZED):
        raise UnknownReference(f"invalid lens scope kind: {kind!r}")
    return {
        "kind": kind,
        "noteIds": [n for n in doc.get("noteIds", []) if isinstance(n, str)],
        "instruction": str(doc.get("instruction", "")),
    }


def in_scope_note_ids(state: WorkspaceState, lens: AffinityLens) -> set[str]:
    """The note ids a lens page must cover at the current state."""
    if lens.scope.kind == SCOPE_SELECTED:
        return {n for n in lens.scope.note_ids if n in state.notes}
    return {n.id for n in state.notes.values() if n.page == PAGE_MAIN}


def _scoped_notes(state: WorkspaceState, scope: dict) -> list:
    if scope["kind"] == SCOPE_SELECTED:
        return [state.notes[n] for n in scope["noteIds"] if n in state.notes]
    return [n for n in state.notes.values() if n.page == PAGE_MAIN]


class AffinityEngine:
    def __init__(self, hub, gateway, ids):
        self._hub = hub
        self._gw = gateway
        self._ids = ids
        # workspace id -> lens name -> candidate doc, from the latest
        # generate_lenses call, so installs can refer to lenses by name
        self._candidates: dict[str, dict[str, dict]] = {}
        self._candidates_lock = threading.Lock()

    # --- lens generation ---

    def generate_lenses(self, workspace_id: str, scope_doc: Optional[dict] = None) -> list[dict]:
        """Propose 2-5 refined lens candidates for the scope. Pure read."""
        scope = parse_scope_doc(scope_doc)
        state = self._hub.get_state(workspace_id)
        notes = _scoped_notes(state, scope)
        if len(notes) < 2:
            raise TooFewNotes("lens generation needs at least two notes in scope")
        payload, _ = notes_payload(notes)
        result = self._gw.complete_structured(
            "affinity-lenses",
            {"notes": payload, "instruction": scope["instruction"]},
            workspace_id=workspace_id,
        )
        candidates: list[dict] = []
        seen: set[str] = set()
        for lens_doc in result.value:
            if lens_doc["name"] in seen:
                continue
            seen.add(lens_doc["name"])
            candidate = {
                "name": lens_doc["name"],
                "description": lens_doc["description"],
                "affinities": [
                    {"groupName": g["name"], "groupDescription": g["description"]}
                    for g in lens_doc["groups"]
                ],
                "scope": scope,
                "refinementIncomplete": False,
            }
            candidates.append(self.refine_group_names(workspace_id, candidate))
            if len(candidates) == MAX_LENSES:
                break
        with self._candidates_lock:
            self._candidates[workspace_id] = {c["name"]: c for c in candidates}
        return candidates

    def refine_group_names(self, workspace_id: str, candidate: dict) -> dict:
        """Rename groups until pairwise similarity falls below threshold.

        Bounded at MAX_REFINEMENT_PASSES provider passes; when the bound is
        hit with a pair still at or above threshold the candidate comes back
        flagged refinementIncomplete instead of looping forever.
        """
        threshold = self._hub.get_state(workspace_id).settings.similarity_threshold
        affinities = list(candidate["affinities"])
        for _ in range(MAX_REFINEMENT_PASSES):
            payload = groups_payload([(a["groupName"], a["groupDescription"]) for a in affinities])
            result = self._gw.complete_structured(
                "group-name-similarity", {"groups": payload}, workspace_id=workspace_id
            )
            pairs = result.value["pairs"]
            if all(p["similarity"] < threshold for p in pairs):
                return {**candidate, "affinities": affinities, "refinementIncomplete": False}
            renames = result.value["renames"]
            renamed = []
            names_seen: set[str] = set()
            for a in affinities:
                name = renames.get(a["groupName"], a["groupName"])
                if name in names_seen:
                    continue  # rename collided; near-duplicate folds away
                names_seen.add(name)
                renamed.append({"groupName": name, "groupDescription": a["groupDescription"]})
            affinities = renamed
        return {**candidate, "affinities": affinities, "refinementIncomplete": True}

    # --- installation and grouping ---

    def candidate_named(self, workspace_id: str, name: str) -> dict:
        with self._candidates_lock:
            candidate = self._candidates.get(workspace_id, {}).get(name)
        if candidate is None:
            raise UnknownReference(f"no generated lens named {name!r}; generate lenses first")
        return candidate

    def install_lens(self, workspace_id: str, candidate: dict, actor: str = ENGINE_ACTOR) -> tuple[int, str]:
        """Install a candidate and materialize its page; returns (rev, lens id)."""
        state = self._hub.get_state(workspace_id)
        scope = parse_scope_doc(candidate.get("scope"))
        notes = _scoped_notes(state, scope)
        assignment: dict[str, Optional[str]] = {}
        rationales: dict[str, str] = {}
        if notes:
            assignment, rationales = self._assign(
                workspace_id,
                candidate["name"],
                candidate.get("description", ""),
                candidate["affinities"],
                notes,
            )
        lens_id = self._ids.lens_id()
        revision, _ = self._hub.submit_internal(
            workspace_id,
            {
                "kind": "InstallLensPage",
                "actor": actor,
                "payload": {
                    "lens": {
                        "id": lens_id,
                        "name": candidate["name"],
                        "description": candidate.get("description", ""),
                        "affinities": candidate["affinities"],
                        "scope": scope,
                        "refinementIncomplete": bool(candidate.get("refinementIncomplete", False)),
                    },
                    "assignment": assignment,
                    "rationales": rationales,
                    "baseRevision": state.revision,
                },
            },
        )
        return revision, lens_id

    def _assign(
        self,
        workspace_id: str,
        lens_name: str,
        lens_description: str,
        affinities: list[dict],
        notes: list,
    ) -> tuple[dict[str, Optional[str]], dict[str, str]]:
        """One provider categorization pass over the given notes."""
        payload, index = notes_payload(notes)
        valid = {a["groupName"] for a in affinities}
        result = self._gw.complete_structured(
            "affinity-assign",
            {
                "lensName": lens_name,
                "lensDescription": lens_description,
                "groups": groups_payload([(a["groupName"], a["groupDescription"]) for a in affinities]),
                "notes": payload,
            },
            workspace_id=workspace_id,
        )
        assignment: dict[str, Optional[str]] = {index[i]: None for i in index}
        placed: set[str] = set()
        for entry in result.value["assignment"]:
            note_id = index.get(entry["idx"])
            if note_id is None:
                log.warning("assignment for out-of-range note index %s ignored", entry["idx"])
                continue
            if note_id in placed:
                log.warning("note %s assigned twice; keeping the first placement", note_id)
                continue
            placed.add(note_id)
            group = entry["group"]
            if group is not None and group not in valid:
                log.warning("assignment to unknown group %r treated as ungrouped", group)
                group = None
            assignment[note_id] = group
        rationales = {
            name: text for name, text in result.value["rationales"].items() if name in valid
        }
        return assignment, rationales

    def regroup_on_switch(self, workspace_id: str, lens_id: str, actor: str = ENGINE_ACTOR) -> Optional[int]:
        """Incrementally reassign notes added or edited since the last pass.

        Returns the new revision, or None when nothing changed (in which
        case the provider is never consulted and no mutation is submitted).
        """
        state = self._hub.get_state(workspace_id)
        installed = state.lenses.get(lens_id)
        if installed is None:
            raise UnknownReference(f"no such lens: {lens_id}")
        lens, page = installed.lens, installed.page
        scope_ids = in_scope_note_ids(state, lens)
        last = page.last_regroup_revision
        changed = sorted(
            nid
            for nid in scope_ids
            if nid not in page.assignment
            or state.notes[nid].created_at_revision > last
            or state.notes[nid].edited_at_revision > last
        )
        stale = sorted(nid for nid in page.assignment if nid not in scope_ids)
        if not changed and not stale:
            return None
        merged: dict[str, Optional[str]] = {
            nid: page.assignment[nid]
            for nid in scope_ids
            if nid in page.assignment and nid not in changed
        }
        rationales = dict(page.rationales)
        if changed:
            affinities = [
                {"groupName": a.group_name, "groupDescription": a.group_description}
                for a in lens.affinities
            ]
            updates, new_rationales = self._assign(
                workspace_id,
                lens.name,
                lens.description,
                affinities,
                [state.notes[nid] for nid in changed],
            )
            merged.update(updates)
            rationales.update(new_rationales)
        revision, _ = self._hub.submit_internal(
            workspace_id,
            {
                "kind": "ReplaceGrouping",
                "actor": actor,
                "payload": {
                    "lensId": lens_id,
                    "assignment": merged,
                    "rationales": rationales,
                    "baseRevision": state.revision,
                },
            },
        )
        return revision

    # --- hierarchical sub-grouping ---

    def suggest_dimensions(self, workspace_id: str, group_id: str) -> list[str]:
        """Propose 2-6 sub-grouping dimensions for a group. Pure read."""
        state = self._hub.get_state(workspace_id)
        group = state.groups.get(group_id)
        if group is None:
            raise UnknownReference(f"no such group: {group_id}")
        members = [state.notes[n] for n in group.member_notes if n in state.notes]
        if len(members) < 2:
            raise TooFewNotes("dimension suggestions need at least two member notes")
        payload, _ = notes_payload(members)
        result = self._gw.complete_structured(
            "suggest-dimensions",
            {"groupTitle": group.title, "notes": payload},
            workspace_id=workspace_id,
        )
        dimensions: list[str] = []
        for dim in result.value:
            if dim not in dimensions:
                dimensions.append(dim)
            if len(dimensions) == MAX_DIMENSIONS:
                break
        return dimensions

    def hierarchical_group(
        self, workspace_id: str, group_id: str, dimensions: list, actor: str = ENGINE_ACTOR
    ) -> dict:
        """Split a group's notes into per-dimension subgroups.

        Replaces any previous subgroups of the group (their notes are pooled
        back in before redistribution). Notes the provider cannot place stay
        direct members of the parent group.
        """
        dims: list[str] = []
        for d in dimensions or []:
            if isinstance(d, str) and d.strip() and d.strip() not in dims:
                dims.append(d.strip())
        if not dims:
            raise EmptyDimensions("at least one dimension is required")
        state = self._hub.get_state(workspace_id)
        group = state.groups.get(group_id)
        if group is None:
            raise UnknownReference(f"no such group: {group_id}")

        # pool the group's own notes plus everything under its subtree
        descendants: list[str] = []
        frontier = [group_id]
        while frontier:
            parent = frontier.pop(0)
            children = sorted(g.id for g in state.groups.values() if g.parent == parent)
            descendants.extend(children)
            frontier.extend(children)
        note_ids: list[str] = list(group.member_notes)
        for gid in descendants:
            note_ids.extend(state.groups[gid].member_notes)

        revision = state.revision
        for gid in reversed(descendants):  # deepest first
            revision, _ = self._hub.submit_internal(
                workspace_id,
                {"kind": "DeleteGroup", "actor": actor, "payload": {"groupId": gid}},
            )

        subgroups: list[dict] = []
        if note_ids:
            notes = [state.notes[n] for n in note_ids if n in state.notes]
            assignment, _ = self._assign(
                workspace_id,
                group.title,
                group.rationale or "",
                [{"groupName": d, "groupDescription": ""} for d in dims],
                notes,
            )
            by_dim: dict[str, list[str]] = {d: [] for d in dims}
            unplaced: list[str] = []
            for note in notes:
                target = assignment.get(note.id)
                if target is None:
                    unplaced.append(note.id)
                else:
                    by_dim[target].append(note.id)
            for dim in dims:
                members = by_dim[dim]
                if not members:
                    continue  # dimension attracted nothing; no empty shell
                sub_id = self._ids.group_id()
                revision, _ = self._hub.submit_internal(
                    workspace_id,
                    {
                        "kind": "CreateGroup",
                        "actor": actor,
                        "payload": {"groupId": sub_id, "title": dim, "page": group.page, "parent": group_id},
                    },
                )
                landed = []
                for nid in members:
                    try:
                        revision, _ = self._hub.submit_internal(
                            workspace_id,
                            {
                                "kind": "AssignNoteToGroup",
                                "actor": actor,
                                "payload": {"noteId": nid, "groupId": sub_id},
                            },
                        )
                        landed.append(nid)
                    except UnknownReference:
                        log.warning("note %s vanished during sub-grouping; skipped", nid)
                subgroups.append({"groupId": sub_id, "title": dim, "members": landed})
            current = self._hub.get_state(workspace_id)
            for nid in unplaced:
                if nid in current.notes and current.notes[nid].group != group_id:
                    revision, _ = self._hub.submit_internal(
                        workspace_id,
                        {
                            "kind": "AssignNoteToGroup",
                            "actor": actor,
                            "payload": {"noteId": nid, "groupId": group_id},
                        },
                    )
        return {"groupId": group_id, "subgroups": subgroups, "revision": revision}
