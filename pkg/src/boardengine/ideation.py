"""Idea-repository assistance: goal decomposition, expansions, discussion hints.

Read-only operations (decompose, expand, discussion hints) never touch
workspace state; only the explicit follow-ups (expand_subtask,
apply_suggestion, add_hint_as_note) submit mutations, and those go through
the hub like anyone else's.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Optional

from .errors import (
    AlreadyExpanded,
    EmptyGoal,
    EmptyQuery,
    UnknownReference,
    UnknownRelationType,
)
from .model import PAGE_MAIN, PROVENANCE_EXPANSION_HINT, WorkspaceState
from .promptdata import notes_payload
from .relations import RELATION_DESCRIPTIONS, is_valid_relation_type

HINT_KIND_QUERY = "query-expansion"
HINT_KIND_RELATION = "relation-expansion"
HINT_KIND_DISCUSSION = "discussion-hint"

MAX_SUBTASK_CARDS = 8
MAX_RELATION_HINTS = 3
MAX_DISCUSSION_HINTS = 8


@dataclass(frozen=True)
class SubtaskCard:
    id: str
    title: str
    brief_detail: str
    expanded: bool = False

    def to_wire(self) -> dict:
        return {
            "cardId": self.id,
            "title": self.title,
            "briefDetail": self.brief_detail,
            "expanded": self.expanded,
        }


@dataclass(frozen=True)
class IdeaHint:
    text: str
    score: float
    kind: str
    source_note: Optional[str] = None
    source_group: Optional[str] = None

    def to_wire(self) -> dict:
        doc = {"text": self.text, "score": self.score, "kind": self.kind}
        if self.source_note is not None:
            doc["sourceNote"] = self.source_note
        if self.source_group is not None:
            doc["sourceGroup"] = self.source_group
        return doc


def _surviving(hints: list[IdeaHint], threshold: float, cap: Optional[int]) -> list[IdeaHint]:
    """Keep strictly-above-threshold hints; cap by descending score, stable."""
    kept = [h for h in hints if h.score > threshold]
    if cap is not None and len(kept) > cap:
        kept = sorted(kept, key=lambda h: -h.score)[:cap]
    return kept


class IdeationEngine:
    def __init__(self, hub, gateway, ids):
        self._hub = hub
        self._gw = gateway
        self._ids = ids
        # workspace id -> card id -> SubtaskCard; survives across sessions so
        # late joiners can still expand earlier cards
        self._cards: dict[str, dict[str, SubtaskCard]] = {}
        self._cards_lock = threading.Lock()

    # --- card registry ---

    def cards_of(self, workspace_id: str) -> list[SubtaskCard]:
        with self._cards_lock:
            return list(self._cards.get(workspace_id, {}).values())

    def _get_card(self, workspace_id: str, card_id: str) -> SubtaskCard:
        with self._cards_lock:
            card = self._cards.get(workspace_id, {}).get(card_id)
        if card is None:
            raise UnknownReference(f"no such subtask card: {card_id}")
        return card

    def _put_card(self, workspace_id: str, card: SubtaskCard) -> None:
        with self._cards_lock:
            self._cards.setdefault(workspace_id, {})[card.id] = card

    # --- state access ---

    def _state(self, workspace_id: str) -> WorkspaceState:
        return self._hub.get_state(workspace_id)

    def _note(self, state: WorkspaceState, note_id: str):
        note = state.notes.get(note_id)
        if note is None:
            raise UnknownReference(f"no such note: {note_id}")
        return note

    # --- operations ---

    def decompose_goal(self, workspace_id: str, goal_text: str) -> list[SubtaskCard]:
        """Break a goal into 3-8 brief subtask cards. Pure read."""
        if not isinstance(goal_text, str) or not goal_text.strip():
            raise EmptyGoal("goal text must be non-empty")
        self._hub.ensure_workspace(workspace_id)
        result = self._gw.complete_structured(
            "goal-decompose", {"goal": goal_text.strip()}, workspace_id=workspace_id
        )
        cards: list[SubtaskCard] = []
        seen_titles: set[str] = set()
        for entry in result.value:
            if entry["title"] in seen_titles:
                continue  # provider repeated itself; keep the first occurrence
            seen_titles.add(entry["title"])
            cards.append(
                SubtaskCard(
                    id=self._ids.card_id(),
                    title=entry["title"],
                    brief_detail=entry["detail"],
                )
            )
            if len(cards) == MAX_SUBTASK_CARDS:
                break
        for card in cards:
            self._put_card(workspace_id, card)
        return cards

    def expand_subtask(self, workspace_id: str, card_id: str, actor: str) -> tuple[int, str]:
        """Unfold a card into an empty topic group on MAIN."""
        card = self._get_card(workspace_id, card_id)
        if card.expanded:
            raise AlreadyExpanded(f"card already expanded: {card_id}")
        group_id = self._ids.group_id()
        revision, _ = self._hub.submit_internal(
            workspace_id,
            {
                "kind": "CreateGroup",
                "actor": actor,
                "payload": {"groupId": group_id, "title": card.title, "rationale": card.brief_detail},
            },
        )
        self._put_card(workspace_id, replace(card, expanded=True))
        return revision, group_id

    def expand_by_query(self, workspace_id: str, note_id: str, query: str) -> list[IdeaHint]:
        """Thinking hints for one note, steered by a user query. Pure read."""
        if not isinstance(query, str) or not query.strip():
            raise EmptyQuery("query must be non-empty")
        state = self._state(workspace_id)
        note = self._note(state, note_id)
        result = self._gw.complete_structured(
            "query-expand",
            {"noteText": note.text, "query": query.strip()},
            workspace_id=workspace_id,
        )
        hints = [
            IdeaHint(text=e["text"], score=e["score"], kind=HINT_KIND_QUERY, source_note=note_id)
            for e in result.value
        ]
        return _surviving(hints, state.settings.confidence_threshold, cap=None)

    def expand_by_relation(self, workspace_id: str, note_id: str, relation_type: str) -> list[IdeaHint]:
        """Up to three hints that stand in a typed relation to the note."""
        if not is_valid_relation_type(relation_type):
            raise UnknownRelationType(f"relation type not in catalog: {relation_type!r}")
        state = self._state(workspace_id)
        note = self._note(state, note_id)
        result = self._gw.complete_structured(
            "relation-expansion",
            {
                "selectWard": relation_type,
                "relationDescription": RELATION_DESCRIPTIONS[relation_type],
                "sourceNote": note.text,
            },
            workspace_id=workspace_id,
        )
        hints = [
            IdeaHint(text=e["text"], score=e["score"], kind=HINT_KIND_RELATION, source_note=note_id)
            for e in result.value
        ]
        return _surviving(hints, state.settings.confidence_threshold, cap=MAX_RELATION_HINTS)

    def apply_suggestion(self, workspace_id: str, note_id: str, suggestion: str, actor: str) -> tuple[int, str]:
        """Rewrite the note per the hint; returns (revision, new text)."""
        state = self._state(workspace_id)
        note = self._note(state, note_id)
        result = self._gw.complete_structured(
            "apply-suggestion",
            {"noteText": note.text, "suggestion": suggestion},
            workspace_id=workspace_id,
        )
        new_text = result.value
        revision, _ = self._hub.submit_internal(
            workspace_id,
            {
                "kind": "EditNoteText",
                "actor": actor,
                "payload": {"noteId": note_id, "text": new_text},
            },
        )
        return revision, new_text

    def add_hint_as_note(
        self, workspace_id: str, text: str, author: str, source_note_id: Optional[str] = None
    ) -> tuple[int, str]:
        """Capture a hint as a real note next to its source (or at origin)."""
        state = self._state(workspace_id)
        x, y = 0.0, 0.0
        source = state.notes.get(source_note_id) if source_note_id else None
        if source is not None:
            x, y = source.x + 1.0, source.y
        note_id = self._ids.note_id()
        revision, _ = self._hub.submit_internal(
            workspace_id,
            {
                "kind": "CreateNote",
                "actor": author,
                "payload": {
                    "noteId": note_id,
                    "text": text,
                    "x": x,
                    "y": y,
                    "provenance": PROVENANCE_EXPANSION_HINT,
                },
            },
        )
        return revision, note_id

    def group_discussion_hints(
        self, workspace_id: str, group_id: str, instruction: Optional[str] = None
    ) -> list[IdeaHint]:
        """Up to eight discussion hints for a topic group. Pure read."""
        state = self._state(workspace_id)
        group = state.groups.get(group_id)
        if group is None:
            raise UnknownReference(f"no such group: {group_id}")
        members = [state.notes[n] for n in group.member_notes if n in state.notes]
        payload, _ = notes_payload(members)
        result = self._gw.complete_structured(
            "group-discussion-hints",
            {"groupTitle": group.title, "instruction": (instruction or "").strip(), "notes": payload},
            workspace_id=workspace_id,
        )
        hints = [
            IdeaHint(text=e["text"], score=e["score"], kind=HINT_KIND_DISCUSSION, source_group=group_id)
            for e in result.value
        ]
        return _surviving(hints, state.settings.confidence_threshold, cap=MAX_DISCUSSION_HINTS)
