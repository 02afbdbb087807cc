"""Mutual-awareness relation hints: generation, filtering, periodic refresh.

The engine turns provider candidates into a clean hint set (catalog types
only, no self pairs, one hint per unordered pair, confidence filtered,
cross-author when asked) and swaps it in atomically with a single
ReplaceRelationHints mutation. The scheduler decides *when*, using an
injected clock; it skips the provider entirely while the workspace revision
is unchanged.
"""

from __future__ import annotations

import logging
from typing import Optional

from .errors import BoardError, TooFewNotes
from .model import PAGE_MAIN, WorkspaceState
from .promptdata import notes_payload
from .relations import is_valid_relation_type

log = logging.getLogger(__name__)

ENGINE_ACTOR = "relation-hints"


class RelationHintEngine:
    def __init__(self, hub, gateway):
        self._hub = hub
        self._gw = gateway

    def generate_hints(self, workspace_id: str) -> tuple[list[dict], int]:
        """Build a filtered hint list; returns (wire hints, base revision)."""
        state: WorkspaceState = self._hub.get_state(workspace_id)
        notes = [n for n in state.notes.values() if n.page == PAGE_MAIN]
        if len(notes) < 2:
            raise TooFewNotes("relation hints need at least two notes")
        payload, index = notes_payload(notes)
        result = self._gw.complete_structured(
            "relation-hints", {"notes": payload}, workspace_id=workspace_id
        )
        settings = state.settings
        best_per_pair: dict[frozenset[str], dict] = {}
        order: list[frozenset[str]] = []
        for cand in result.value:
            source = index.get(cand["source"])
            target = index.get(cand["target"])
            if source is None or target is None:
                log.warning("dropping hint with out-of-range note index: %s", cand)
                continue
            if source == target:
                continue
            if not is_valid_relation_type(cand["relationType"]):
                log.warning("dropping hint with non-catalog type %r", cand["relationType"])
                continue
            if cand["confidence"] < settings.confidence_threshold:
                continue
            if settings.cross_user_only and state.notes[source].author == state.notes[target].author:
                continue
            pair = frozenset((source, target))
            held = best_per_pair.get(pair)
            if held is None:
                best_per_pair[pair] = {**cand, "source": source, "target": target}
                order.append(pair)
            elif cand["confidence"] > held["confidence"]:
                best_per_pair[pair] = {**cand, "source": source, "target": target}
        hints = [best_per_pair[p] for p in order]
        hints.sort(key=lambda h: -h["confidence"])
        hints = hints[: settings.max_hints_per_refresh]
        wire = [
            {
                "source": h["source"],
                "target": h["target"],
                "relationType": h["relationType"],
                "explanation": h["explanation"],
                "confidence": h["confidence"],
            }
            for h in hints
        ]
        return wire, state.revision

    def refresh(self, workspace_id: str) -> tuple[int, int]:
        """Atomically replace the hint set; returns (new revision, base)."""
        hints, base = self.generate_hints(workspace_id)
        revision, _ = self._hub.submit_internal(
            workspace_id,
            {
                "kind": "ReplaceRelationHints",
                "actor": ENGINE_ACTOR,
                "payload": {"hints": hints, "baseRevision": base},
            },
        )
        return revision, base


class HintScheduler:
    """Periodic refresh driver for one workspace.

    tick() is cheap and safe to call often; a generation attempt fires only
    when the interval has elapsed, and the provider is consulted only when
    the revision moved since the last successful replacement. Failed
    generations leave the previous hints in place and retry next interval.
    """

    def __init__(self, hub, engine: RelationHintEngine, workspace_id: str, clock, interval_ms: Optional[int] = None):
        self._hub = hub
        self._engine = engine
        self._workspace_id = workspace_id
        self._clock = clock
        self._interval_override = interval_ms
        self._next_due: Optional[int] = None
        self._last_generated_revision: Optional[int] = None
        self.attempt_times: list[int] = []

    def tick(self) -> Optional[int]:
        """Returns the new revision when hints were replaced, else None."""
        state = self._hub.get_state(self._workspace_id)
        if not state.settings.relation_hints_enabled:
            self._next_due = None  # re-enable fires immediately
            return None
        now = self._clock.now_ms()
        if self._next_due is None:
            self._next_due = now
        if now < self._next_due:
            return None
        interval = self._interval_override or state.settings.hint_refresh_interval_ms
        self._next_due = now + interval
        self.attempt_times.append(now)
        if state.revision == self._last_generated_revision:
            return None  # nothing changed; no provider call
        try:
            revision, base = self._engine.refresh(self._workspace_id)
        except TooFewNotes:
            self._last_generated_revision = state.revision
            return None
        except BoardError as exc:
            log.warning("hint refresh failed, keeping previous hints: %s", exc)
            return None
        # an interleaved user mutation makes the new revision jump past
        # base+1; record only the base then, so the missed change still
        # triggers a regeneration next interval
        self._last_generated_revision = revision if revision == base + 1 else base
        return revision
