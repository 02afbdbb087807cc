"""Workspace mutation semantics: application, validation, and invariants."""

from __future__ import annotations

import random

import pytest

from boardengine.errors import (
    EmptyText,
    InvariantViolation,
    NoActiveRecording,
    NotASubgroup,
    RecordingAlreadyActive,
    UnknownReference,
)
from boardengine.model import MAX_NOTE_TEXT_LEN, PAGE_MAIN, empty_state
from boardengine.mutations import Mutation, apply_mutation
from boardengine.serialize import serialize_state


def mut(kind: str, actor: str = "alice", **payload) -> Mutation:
    return Mutation(kind=kind, actor=actor, payload=payload)


def make_note(state, note_id: str, text: str = "an idea", actor: str = "alice", **extra):
    state, _ = apply_mutation(
        state, mut("CreateNote", actor=actor, noteId=note_id, text=text, x=0.0, y=0.0, **extra)
    )
    return state


def make_group(state, group_id: str, title: str = "Topic", **extra):
    state, _ = apply_mutation(state, mut("CreateGroup", groupId=group_id, title=title, **extra))
    return state


class TestNotes:
    def test_create_note_basic(self):
        """A created note lands in state with author, position, and provenance."""
        state = empty_state("ws_1")
        state, events = apply_mutation(
            state, mut("CreateNote", noteId="note_a", text="hello", x=10, y=20)
        )
        note = state.notes["note_a"]
        assert note.author == "alice"
        assert note.text == "hello"
        assert (note.x, note.y) == (10.0, 20.0)
        assert note.page == PAGE_MAIN
        assert note.group is None
        assert note.provenance == "manual"
        assert note.created_at_revision == 1
        assert events == [{"event": "note-created", "noteId": "note_a", "author": "alice"}]

    def test_create_note_rejects_empty_and_whitespace_text(self):
        state = empty_state("ws_1")
        for bad in ("", "   ", "\n\t"):
            with pytest.raises(EmptyText):
                apply_mutation(state, mut("CreateNote", noteId="note_a", text=bad, x=0, y=0))

    def test_create_note_rejects_oversized_text(self):
        state = empty_state("ws_1")
        state = make_note(state, "note_ok", text="x" * MAX_NOTE_TEXT_LEN)
        with pytest.raises(InvariantViolation):
            apply_mutation(
                state,
                mut("CreateNote", noteId="note_b", text="x" * (MAX_NOTE_TEXT_LEN + 1), x=0, y=0),
            )

    def test_create_note_rejects_duplicate_id(self):
        state = make_note(empty_state("ws_1"), "note_a")
        with pytest.raises(InvariantViolation):
            apply_mutation(state, mut("CreateNote", noteId="note_a", text="again", x=0, y=0))

    def test_create_note_rejects_nonfinite_position(self):
        state = empty_state("ws_1")
        with pytest.raises(InvariantViolation):
            apply_mutation(
                state, mut("CreateNote", noteId="note_a", text="hi", x=float("nan"), y=0)
            )

    def test_create_note_on_missing_page_rejected(self):
        state = empty_state("ws_1")
        with pytest.raises(UnknownReference):
            apply_mutation(
                state, mut("CreateNote", noteId="note_a", text="hi", x=0, y=0, page="lens_zz")
            )

    def test_edit_note_text_replaces_whole_text_and_reports_original(self):
        """Whole-text replacement: the event carries the text it overwrote."""
        state = make_note(empty_state("ws_1"), "note_a", text="first")
        state, events = apply_mutation(
            state, mut("EditNoteText", actor="bryan", noteId="note_a", text="second")
        )
        assert state.notes["note_a"].text == "second"
        assert events[0]["originalText"] == "first"
        assert state.notes["note_a"].edited_at_revision == state.revision

    def test_concurrent_edits_last_write_wins(self):
        """Two full-text edits in sequence: the later one is the survivor."""
        state = make_note(empty_state("ws_1"), "note_a", text="base")
        state, _ = apply_mutation(state, mut("EditNoteText", actor="alice", noteId="note_a", text="alice version"))
        state, _ = apply_mutation(state, mut("EditNoteText", actor="bryan", noteId="note_a", text="bryan version"))
        assert state.notes["note_a"].text == "bryan version"

    def test_edit_missing_note_rejected(self):
        with pytest.raises(UnknownReference):
            apply_mutation(empty_state("ws_1"), mut("EditNoteText", noteId="note_zz", text="x"))

    def test_move_note(self):
        state = make_note(empty_state("ws_1"), "note_a")
        state, _ = apply_mutation(state, mut("MoveNote", noteId="note_a", x=-3.5, y=99))
        assert (state.notes["note_a"].x, state.notes["note_a"].y) == (-3.5, 99.0)

    def test_delete_note_removes_from_group_membership(self):
        state = make_group(empty_state("ws_1"), "grp_1")
        state = make_note(state, "note_a")
        state, _ = apply_mutation(state, mut("AssignNoteToGroup", noteId="note_a", groupId="grp_1"))
        state, _ = apply_mutation(state, mut("DeleteNote", noteId="note_a"))
        assert "note_a" not in state.notes
        assert state.groups["grp_1"].member_notes == ()

    def test_delete_note_prunes_relation_hints(self):
        state = make_note(empty_state("ws_1"), "note_a")
        state = make_note(state, "note_b", text="other idea")
        state, _ = apply_mutation(
            state,
            mut(
                "ReplaceRelationHints",
                actor="system",
                hints=[
                    {
                        "source": "note_a",
                        "target": "note_b",
                        "relationType": "Causes",
                        "explanation": "",
                        "confidence": 0.9,
                    }
                ],
                baseRevision=2,
            ),
        )
        assert len(state.relation_hints) == 1
        state, _ = apply_mutation(state, mut("DeleteNote", noteId="note_a"))
        assert state.relation_hints == ()


class TestGroups:
    def test_create_and_rename_group(self):
        state = make_group(empty_state("ws_1"), "grp_1", title="Lodging")
        assert state.groups["grp_1"].title == "Lodging"
        state, _ = apply_mutation(state, mut("RenameGroup", groupId="grp_1", title="Housing"))
        assert state.groups["grp_1"].title == "Housing"

    def test_assign_note_moves_between_groups(self):
        """Reassignment removes the note from its old group in the same step."""
        state = empty_state("ws_1")
        state = make_group(state, "grp_1")
        state = make_group(state, "grp_2")
        state = make_note(state, "note_a")
        state, _ = apply_mutation(state, mut("AssignNoteToGroup", noteId="note_a", groupId="grp_1"))
        state, events = apply_mutation(state, mut("AssignNoteToGroup", noteId="note_a", groupId="grp_2"))
        assert state.notes["note_a"].group == "grp_2"
        assert "note_a" not in state.groups["grp_1"].member_notes
        assert "note_a" in state.groups["grp_2"].member_notes
        assert events[0]["previousGroup"] == "grp_1"

    def test_assign_to_same_group_is_a_noop_with_revision_bump(self):
        state = make_group(empty_state("ws_1"), "grp_1")
        state = make_note(state, "note_a")
        state, _ = apply_mutation(state, mut("AssignNoteToGroup", noteId="note_a", groupId="grp_1"))
        before = state.revision
        state, events = apply_mutation(state, mut("AssignNoteToGroup", noteId="note_a", groupId="grp_1"))
        assert state.revision == before + 1
        assert events == []
        assert state.groups["grp_1"].member_notes.count("note_a") == 1

    def test_remove_note_from_group(self):
        state = make_group(empty_state("ws_1"), "grp_1")
        state = make_note(state, "note_a")
        state, _ = apply_mutation(state, mut("AssignNoteToGroup", noteId="note_a", groupId="grp_1"))
        state, _ = apply_mutation(state, mut("RemoveNoteFromGroup", noteId="note_a"))
        assert state.notes["note_a"].group is None
        assert state.groups["grp_1"].member_notes == ()

    def test_remove_note_from_group_when_ungrouped_bumps_revision_silently(self):
        state = make_note(empty_state("ws_1"), "note_a")
        before = state.revision
        state, events = apply_mutation(state, mut("RemoveNoteFromGroup", noteId="note_a"))
        assert state.revision == before + 1
        assert events == []

    def test_promote_subgroup_clears_parent(self):
        state = make_group(empty_state("ws_1"), "grp_1")
        state = make_group(state, "grp_2", parent="grp_1")
        state, _ = apply_mutation(state, mut("PromoteSubgroup", groupId="grp_2"))
        assert state.groups["grp_2"].parent is None

    def test_promote_toplevel_group_rejected(self):
        state = make_group(empty_state("ws_1"), "grp_1")
        with pytest.raises(NotASubgroup):
            apply_mutation(state, mut("PromoteSubgroup", groupId="grp_1"))

    def test_delete_group_orphans_members_and_reparents_children(self):
        """Deleting a group never deletes notes; subgroups climb one level."""
        state = empty_state("ws_1")
        state = make_group(state, "grp_root")
        state = make_group(state, "grp_mid", parent="grp_root")
        state = make_group(state, "grp_leaf", parent="grp_mid")
        state = make_note(state, "note_a")
        state, _ = apply_mutation(state, mut("AssignNoteToGroup", noteId="note_a", groupId="grp_mid"))
        state, _ = apply_mutation(state, mut("DeleteGroup", groupId="grp_mid"))
        assert "grp_mid" not in state.groups
        assert "note_a" in state.notes
        assert state.notes["note_a"].group is None
        assert state.groups["grp_leaf"].parent == "grp_root"

    def test_delete_toplevel_group_promotes_children_to_toplevel(self):
        state = make_group(empty_state("ws_1"), "grp_1")
        state = make_group(state, "grp_2", parent="grp_1")
        state, _ = apply_mutation(state, mut("DeleteGroup", groupId="grp_1"))
        assert state.groups["grp_2"].parent is None

    def test_cross_page_assignment_rejected(self):
        state = make_group(empty_state("ws_1"), "grp_1")
        state = make_note(state, "note_a")
        # a lens page group cannot adopt a MAIN note (pages are silos)
        lens_doc = {
            "id": "lens_1",
            "name": "Planning",
            "description": "",
            "affinities": [
                {"groupName": "A", "groupDescription": ""},
                {"groupName": "B", "groupDescription": ""},
            ],
            "scope": {"kind": "global", "noteIds": [], "instruction": ""},
        }
        state, _ = apply_mutation(
            state, mut("InstallLensPage", actor="system", lens=lens_doc, assignment={}, rationales={}, baseRevision=2)
        )
        state, _ = apply_mutation(
            state, mut("CreateGroup", groupId="grp_lens", title="On lens", page="lens_1")
        )
        with pytest.raises(InvariantViolation):
            apply_mutation(state, mut("AssignNoteToGroup", noteId="note_a", groupId="grp_lens"))


class TestRevisionAndActors:
    def test_revision_increments_by_exactly_one_per_mutation(self):
        """Revision is a gapless counter over applied mutations."""
        state = empty_state("ws_1")
        assert state.revision == 0
        state = make_note(state, "note_a")
        assert state.revision == 1
        state = make_note(state, "note_b", text="more")
        assert state.revision == 2
        state, _ = apply_mutation(state, mut("MoveNote", noteId="note_a", x=1, y=1))
        assert state.revision == 3

    def test_rejected_mutation_leaves_state_untouched(self):
        state = make_note(empty_state("ws_1"), "note_a")
        snapshot = serialize_state(state)
        with pytest.raises(UnknownReference):
            apply_mutation(state, mut("MoveNote", noteId="note_zz", x=0, y=0))
        assert serialize_state(state) == snapshot

    def test_actor_roster_records_first_seen_order(self):
        state = empty_state("ws_1")
        state = make_note(state, "note_a", actor="chris")
        state = make_note(state, "note_b", text="x", actor="alice")
        state = make_note(state, "note_c", text="y", actor="chris")
        assert state.users == ("chris", "alice")

    def test_unknown_kind_rejected(self):
        with pytest.raises(InvariantViolation):
            apply_mutation(empty_state("ws_1"), mut("Sabotage"))

    def test_blank_actor_rejected(self):
        with pytest.raises(InvariantViolation):
            apply_mutation(
                empty_state("ws_1"),
                Mutation(kind="CreateNote", actor="", payload={"noteId": "note_a", "text": "x", "x": 0, "y": 0}),
            )


class TestRecording:
    def test_start_and_stop(self):
        state = empty_state("ws_1")
        state, _ = apply_mutation(state, mut("SetRecording", recordingId="rec_1"))
        assert state.active_recording == "rec_1"
        state, _ = apply_mutation(state, mut("SetRecording", recordingId=None))
        assert state.active_recording is None

    def test_double_start_rejected(self):
        state = empty_state("ws_1")
        state, _ = apply_mutation(state, mut("SetRecording", recordingId="rec_1"))
        with pytest.raises(RecordingAlreadyActive):
            apply_mutation(state, mut("SetRecording", recordingId="rec_2"))

    def test_stop_without_start_rejected(self):
        with pytest.raises(NoActiveRecording):
            apply_mutation(empty_state("ws_1"), mut("SetRecording", recordingId=None))


class TestSettings:
    def test_partial_update_keeps_other_fields(self):
        state = empty_state("ws_1")
        state, _ = apply_mutation(
            state, mut("SetSettings", changes={"relationHintsEnabled": True, "crossUserOnly": True})
        )
        assert state.settings.relation_hints_enabled is True
        assert state.settings.cross_user_only is True
        assert state.settings.hint_refresh_interval_ms == 10000
        assert state.settings.confidence_threshold == 0.6

    def test_disabling_hints_clears_current_hints(self):
        state = make_note(empty_state("ws_1"), "note_a")
        state = make_note(state, "note_b", text="b")
        state, _ = apply_mutation(state, mut("SetSettings", changes={"relationHintsEnabled": True}))
        state, _ = apply_mutation(
            state,
            mut(
                "ReplaceRelationHints",
                actor="system",
                hints=[
                    {"source": "note_a", "target": "note_b", "relationType": "Causes", "explanation": "", "confidence": 0.8}
                ],
                baseRevision=state.revision,
            ),
        )
        assert len(state.relation_hints) == 1
        state, events = apply_mutation(state, mut("SetSettings", changes={"relationHintsEnabled": False}))
        assert state.relation_hints == ()
        assert {"event": "hints-cleared"} in events

    def test_unknown_setting_rejected(self):
        with pytest.raises(InvariantViolation):
            apply_mutation(empty_state("ws_1"), mut("SetSettings", changes={"volume": 11}))

    def test_out_of_range_threshold_rejected(self):
        with pytest.raises(InvariantViolation):
            apply_mutation(
                empty_state("ws_1"), mut("SetSettings", changes={"confidenceThreshold": 1.5})
            )
        with pytest.raises(InvariantViolation):
            apply_mutation(
                empty_state("ws_1"), mut("SetSettings", changes={"hintRefreshIntervalMs": 0})
            )


class TestRelationHintMutations:
    def _two_notes(self):
        state = make_note(empty_state("ws_1"), "note_a")
        return make_note(state, "note_b", text="b")

    def _hint(self, source="note_a", target="note_b", rtype="Causes", confidence=0.8):
        return {
            "source": source,
            "target": target,
            "relationType": rtype,
            "explanation": "because",
            "confidence": confidence,
        }

    def test_below_threshold_hints_never_enter_state(self):
        state = self._two_notes()
        state, _ = apply_mutation(
            state,
            mut("ReplaceRelationHints", actor="system", hints=[self._hint(confidence=0.59)], baseRevision=2),
        )
        assert state.relation_hints == ()

    def test_at_threshold_hint_is_kept(self):
        state = self._two_notes()
        state, _ = apply_mutation(
            state,
            mut("ReplaceRelationHints", actor="system", hints=[self._hint(confidence=0.6)], baseRevision=2),
        )
        assert len(state.relation_hints) == 1

    def test_noncatalog_relation_type_rejected(self):
        state = self._two_notes()
        for rtype in ("Related to", "FriendOf"):
            with pytest.raises(InvariantViolation):
                apply_mutation(
                    state,
                    mut("ReplaceRelationHints", actor="system", hints=[self._hint(rtype=rtype)], baseRevision=2),
                )

    def test_self_relation_rejected(self):
        state = self._two_notes()
        with pytest.raises(InvariantViolation):
            apply_mutation(
                state,
                mut(
                    "ReplaceRelationHints",
                    actor="system",
                    hints=[self._hint(target="note_a")],
                    baseRevision=2,
                ),
            )

    def test_duplicate_pair_rejected_regardless_of_direction(self):
        state = self._two_notes()
        with pytest.raises(InvariantViolation):
            apply_mutation(
                state,
                mut(
                    "ReplaceRelationHints",
                    actor="system",
                    hints=[self._hint(), self._hint(source="note_b", target="note_a", rtype="Is a")],
                    baseRevision=2,
                ),
            )

    def test_hint_for_deleted_note_dropped_silently(self):
        """Hints computed against a stale snapshot must not block the refresh."""
        state = self._two_notes()
        state = make_note(state, "note_c", text="c")
        state, _ = apply_mutation(state, mut("DeleteNote", noteId="note_c"))
        state, _ = apply_mutation(
            state,
            mut(
                "ReplaceRelationHints",
                actor="system",
                hints=[self._hint(), self._hint(source="note_c", target="note_b", rtype="Is a")],
                baseRevision=state.revision,
            ),
        )
        assert len(state.relation_hints) == 1
        assert state.relation_hints[0].source == "note_a"

    def test_cap_keeps_highest_confidence_hints(self):
        state = empty_state("ws_1")
        for i in range(26):
            state = make_note(state, f"note_{i:02d}", text=f"idea {i}")
        hints = [
            self._hint(source=f"note_{2 * i:02d}", target=f"note_{2 * i + 1:02d}", confidence=0.6 + i * 0.03)
            for i in range(13)
        ]
        state, _ = apply_mutation(
            state, mut("ReplaceRelationHints", actor="system", hints=hints, baseRevision=state.revision)
        )
        assert len(state.relation_hints) == 10
        kept = {h.confidence for h in state.relation_hints}
        assert min(kept) >= 0.6 + 3 * 0.03 - 1e-9

    def test_replace_is_wholesale(self):
        state = self._two_notes()
        state, _ = apply_mutation(
            state, mut("ReplaceRelationHints", actor="system", hints=[self._hint()], baseRevision=2)
        )
        state, _ = apply_mutation(
            state, mut("ReplaceRelationHints", actor="system", hints=[], baseRevision=3)
        )
        assert state.relation_hints == ()


class TestExclusiveAssignmentProperty:
    """Random mutation storms against an independent membership ledger."""

    def test_note_never_in_two_groups(self):
        rng = random.Random(4021)
        for _ in range(25):
            state = empty_state("ws_prop")
            ledger: dict[str, str | None] = {}  # note -> group, tracked independently
            note_ids = [f"note_{i}" for i in range(8)]
            group_ids = [f"grp_{i}" for i in range(4)]
            for gid in group_ids:
                state = make_group(state, gid)
            for nid in note_ids:
                state = make_note(state, nid, text=f"idea {nid}")
                ledger[nid] = None
            for _ in range(60):
                nid = rng.choice(note_ids)
                if nid not in state.notes:
                    continue
                op = rng.random()
                if op < 0.5:
                    gid = rng.choice(group_ids)
                    if gid not in state.groups:
                        continue
                    state, _ = apply_mutation(state, mut("AssignNoteToGroup", noteId=nid, groupId=gid))
                    ledger[nid] = gid
                elif op < 0.75:
                    state, _ = apply_mutation(state, mut("RemoveNoteFromGroup", noteId=nid))
                    ledger[nid] = None
                elif op < 0.9:
                    gid = rng.choice(group_ids)
                    if gid not in state.groups:
                        continue
                    state, _ = apply_mutation(state, mut("DeleteGroup", groupId=gid))
                    for k, v in ledger.items():
                        if v == gid:
                            ledger[k] = None
                else:
                    state, _ = apply_mutation(state, mut("DeleteNote", noteId=nid))
                    del ledger[nid]

                # oracle 1: implementation matches the independent ledger
                for k, v in ledger.items():
                    assert state.notes[k].group == v
                # oracle 2: membership lists are exclusive and consistent
                seen: dict[str, str] = {}
                for gid, group in state.groups.items():
                    for member in group.member_notes:
                        assert member not in seen, f"{member} in {seen[member]} and {gid}"
                        seen[member] = gid
                        assert state.notes[member].group == gid
                for k, note in state.notes.items():
                    if note.group is not None:
                        assert k in state.groups[note.group].member_notes

    def test_group_forest_stays_acyclic(self):
        """Parent links must always form a forest (no cycles, no dangling)."""
        rng = random.Random(77)
        state = empty_state("ws_forest")
        alive: list[str] = []
        counter = 0
        for _ in range(120):
            op = rng.random()
            if op < 0.5 or not alive:
                counter += 1
                gid = f"grp_{counter}"
                parent = rng.choice(alive) if alive and rng.random() < 0.6 else None
                state = make_group(state, gid, parent=parent)
                alive.append(gid)
            elif op < 0.75:
                gid = rng.choice(alive)
                if state.groups[gid].parent is not None:
                    state, _ = apply_mutation(state, mut("PromoteSubgroup", groupId=gid))
            else:
                gid = rng.choice(alive)
                state, _ = apply_mutation(state, mut("DeleteGroup", groupId=gid))
                alive.remove(gid)
            for gid, group in state.groups.items():
                hops = 0
                cursor = group.parent
                while cursor is not None:
                    assert cursor in state.groups
                    cursor = state.groups[cursor].parent
                    hops += 1
                    assert hops <= len(state.groups), "cycle in group hierarchy"
