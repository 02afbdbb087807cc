"""Shared-workspace domain model.

All types are immutable; state transitions go through
``mutations.apply_mutation`` which returns a fresh ``WorkspaceState``.
Collections inside the state are plain dicts/tuples that are replaced,
never mutated in place, so published states are safe to hand between
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

PAGE_MAIN = "MAIN"

MAX_NOTE_TEXT_LEN = 2000

PROVENANCE_MANUAL = "manual"
PROVENANCE_GOAL_DECOMPOSITION = "goal-decomposition"
PROVENANCE_EXPANSION_HINT = "expansion-hint"
PROVENANCE_DISCUSSION_EXTRACTION = "discussion-extraction"

PROVENANCES = frozenset(
    {
        PROVENANCE_MANUAL,
        PROVENANCE_GOAL_DECOMPOSITION,
        PROVENANCE_EXPANSION_HINT,
        PROVENANCE_DISCUSSION_EXTRACTION,
    }
)

SCOPE_GLOBAL = "global"
SCOPE_SELECTED = "selected"
SCOPE_CUSTOMIZED = "customized"


@dataclass(frozen=True)
class Note:
    """A single idea card."""

    id: str
    author: str
    text: str
    x: float
    y: float
    page: str = PAGE_MAIN
    group: Optional[str] = None
    provenance: str = PROVENANCE_MANUAL
    created_at_revision: int = 0
    edited_at_revision: int = 0


@dataclass(frozen=True)
class TopicGroup:
    """A titled container of notes on one page; may nest via `parent`."""

    id: str
    title: str
    page: str = PAGE_MAIN
    parent: Optional[str] = None
    member_notes: tuple[str, ...] = ()
    rationale: Optional[str] = None
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class WorkspaceSettings:
    relation_hints_enabled: bool = False
    cross_user_only: bool = False
    hint_refresh_interval_ms: int = 10000
    confidence_threshold: float = 0.6
    similarity_threshold: float = 0.6
    relevance_threshold: float = 0.6
    max_hints_per_refresh: int = 10

    def validate(self) -> None:
        for name in ("confidence_threshold", "similarity_threshold", "relevance_threshold"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0.0 <= float(v) <= 1.0:
                raise ValueError(f"{name} must be in [0,1]")
        if self.hint_refresh_interval_ms <= 0:
            raise ValueError("hint_refresh_interval_ms must be > 0")
        if self.max_hints_per_refresh < 1:
            raise ValueError("max_hints_per_refresh must be >= 1")


@dataclass(frozen=True)
class RelationHint:
    """A typed, scored, explained directed relation between two notes."""

    source: str
    target: str
    relation_type: str
    explanation: str
    confidence: float
    generated_at_revision: int = 0

    def pair(self) -> frozenset[str]:
        return frozenset((self.source, self.target))


@dataclass(frozen=True)
class LensAffinity:
    group_name: str
    group_description: str = ""


@dataclass(frozen=True)
class LensScope:
    """What a lens looks at: everything, a fixed selection, or a custom brief."""

    kind: str = SCOPE_GLOBAL
    note_ids: tuple[str, ...] = ()
    instruction: str = ""


@dataclass(frozen=True)
class AffinityLens:
    id: str
    name: str
    description: str
    affinities: tuple[LensAffinity, ...]
    scope: LensScope = field(default_factory=LensScope)
    created_at_revision: int = 0
    refinement_incomplete: bool = False


# Assignment value None means the note could not be placed (UNGROUPED).
UNGROUPED = None


@dataclass(frozen=True)
class LensPage:
    lens: str
    assignment: Mapping[str, Optional[str]] = field(default_factory=dict)
    rationales: Mapping[str, str] = field(default_factory=dict)
    last_regroup_revision: int = 0


@dataclass(frozen=True)
class InstalledLens:
    lens: AffinityLens
    page: LensPage


@dataclass(frozen=True)
class WorkspaceState:
    """Authoritative revisioned container for one workspace."""

    id: str
    revision: int = 0
    users: tuple[str, ...] = ()
    notes: Mapping[str, Note] = field(default_factory=dict)
    groups: Mapping[str, TopicGroup] = field(default_factory=dict)
    lenses: Mapping[str, InstalledLens] = field(default_factory=dict)
    relation_hints: tuple[RelationHint, ...] = ()
    settings: WorkspaceSettings = field(default_factory=WorkspaceSettings)
    active_recording: Optional[str] = None

    def page_exists(self, page: str) -> bool:
        return page == PAGE_MAIN or page in self.lenses

    def main_notes(self) -> list[Note]:
        """MAIN-page notes in creation order (ids are monotone)."""
        return [self.notes[k] for k in sorted(self.notes) if self.notes[k].page == PAGE_MAIN]

    def group_children(self, group_id: str) -> list[TopicGroup]:
        return [g for g in self.groups.values() if g.parent == group_id]


def empty_state(workspace_id: str) -> WorkspaceState:
    return WorkspaceState(id=workspace_id)


def with_revision(state: WorkspaceState, revision: int) -> WorkspaceState:
    return replace(state, revision=revision)
