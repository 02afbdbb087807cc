"""Routes parsed client messages from any transport to the hub and engines.

One dispatcher serves every session. Mutations go straight to the hub (which
acks or errors on the submitting channel); AI requests run the matching
engine and broadcast an aiResult to the whole workspace, tagged with the
revision the engine read and the requester's requestId so clients can pair
results with their asks and spot stale ones.
"""

from __future__ import annotations

import logging
from typing import Callable, Optional

from . import protocol
from .errors import BoardError, ProtocolError

log = logging.getLogger(__name__)


def _field(payload: dict, key: str, kinds, *, required: bool = True, default=None):
    if key not in payload or payload[key] is None:
        if required:
            raise ProtocolError(f"request payload missing field {key!r}")
        return default
    value = payload[key]
    if not isinstance(value, kinds):
        raise ProtocolError(f"request payload field {key!r} has the wrong type")
    return value


class Dispatcher:
    def __init__(self, hub, ideation, affinity, relhints, speech):
        self._hub = hub
        self._ideation = ideation
        self._affinity = affinity
        self._relhints = relhints
        self._speech = speech
        self._ai_handlers: dict[str, Callable] = {
            "decomposeGoal": self._decompose_goal,
            "expandSubtask": self._expand_subtask,
            "expandQuery": self._expand_query,
            "expandRelation": self._expand_relation,
            "applySuggestion": self._apply_suggestion,
            "addHintAsNote": self._add_hint_as_note,
            "groupHints": self._group_hints,
            "listCards": self._list_cards,
            "generateLenses": self._generate_lenses,
            "installLens": self._install_lens,
            "regroup": self._regroup,
            "suggestDimensions": self._suggest_dimensions,
            "hierarchicalGroup": self._hierarchical_group,
            "extractKeyInfo": self._extract_key_info,
            "retrieveRelevant": self._retrieve_relevant,
            "cardToNote": self._card_to_note,
        }

    def handle(self, session, msg: dict) -> None:
        """Process one already-validated client message for a joined session."""
        self._hub.touch(session)
        mtype = msg["type"]
        if mtype == "submitMutation":
            self._hub.submit(session, msg["clientSeq"], msg["mutation"])
        elif mtype == "aiRequest":
            self._ai_request(session, msg)
        elif mtype == "startRecording":
            self._guarded(session, msg, lambda: self._speech.start_recording(session.workspace_id, session.user))
        elif mtype == "stopRecording":
            self._guarded(session, msg, lambda: self._speech.stop_recording(session.workspace_id, session.user))
        elif mtype == "audioChunk":
            self._guarded(session, msg, lambda: self._speech.add_chunk(session.workspace_id, msg["audio"]))
        elif mtype == "ping":
            session.channel.send(protocol.pong_message())
        elif mtype == "join":
            session.channel.send(
                protocol.error_message("protocol-error", "session already joined a workspace")
            )
        else:  # parse_client_message admits nothing else
            session.channel.send(protocol.error_message("protocol-error", f"unroutable type {mtype!r}"))

    def _guarded(self, session, msg: dict, action: Callable) -> None:
        try:
            action()
        except BoardError as exc:
            session.channel.send(protocol.error_message(exc.code, exc.detail or str(exc)))

    def _ai_request(self, session, msg: dict) -> None:
        kind = msg["kind"]
        request_id = msg.get("requestId")
        handler = self._ai_handlers.get(kind)
        if handler is None:
            session.channel.send(
                protocol.error_message("unknown-ai-kind", f"no such request kind: {kind!r}", request_id=request_id)
            )
            return
        base_revision = self._hub.get_state(session.workspace_id).revision
        try:
            payload = handler(session, dict(msg["payload"]))
        except BoardError as exc:
            session.channel.send(
                protocol.error_message(exc.code, exc.detail or str(exc), request_id=request_id)
            )
            return
        except Exception:
            log.exception("aiRequest %s crashed", kind)
            session.channel.send(
                protocol.error_message("internal-error", f"request {kind} failed unexpectedly", request_id=request_id)
            )
            return
        self._hub.broadcast_ai_result(session.workspace_id, kind, payload, base_revision, request_id)

    # --- ideation ---

    def _decompose_goal(self, session, payload: dict) -> dict:
        goal = _field(payload, "goal", str)
        cards = self._ideation.decompose_goal(session.workspace_id, goal)
        return {"cards": [c.to_wire() for c in cards]}

    def _expand_subtask(self, session, payload: dict) -> dict:
        card_id = _field(payload, "cardId", str)
        revision, group_id = self._ideation.expand_subtask(session.workspace_id, card_id, session.user)
        return {"cardId": card_id, "groupId": group_id, "revision": revision}

    def _expand_query(self, session, payload: dict) -> dict:
        note_id = _field(payload, "noteId", str)
        query = _field(payload, "query", str)
        hints = self._ideation.expand_by_query(session.workspace_id, note_id, query)
        return {"noteId": note_id, "hints": [h.to_wire() for h in hints]}

    def _expand_relation(self, session, payload: dict) -> dict:
        note_id = _field(payload, "noteId", str)
        relation_type = _field(payload, "relationType", str)
        hints = self._ideation.expand_by_relation(session.workspace_id, note_id, relation_type)
        return {"noteId": note_id, "relationType": relation_type, "hints": [h.to_wire() for h in hints]}

    def _apply_suggestion(self, session, payload: dict) -> dict:
        note_id = _field(payload, "noteId", str)
        suggestion = _field(payload, "suggestion", str)
        revision, text = self._ideation.apply_suggestion(
            session.workspace_id, note_id, suggestion, session.user
        )
        return {"noteId": note_id, "revision": revision, "text": text}

    def _add_hint_as_note(self, session, payload: dict) -> dict:
        text = _field(payload, "text", str)
        source = _field(payload, "sourceNoteId", str, required=False)
        revision, note_id = self._ideation.add_hint_as_note(
            session.workspace_id, text, session.user, source
        )
        return {"noteId": note_id, "revision": revision}

    def _group_hints(self, session, payload: dict) -> dict:
        group_id = _field(payload, "groupId", str)
        instruction = _field(payload, "instruction", str, required=False)
        hints = self._ideation.group_discussion_hints(session.workspace_id, group_id, instruction)
        return {"groupId": group_id, "hints": [h.to_wire() for h in hints]}

    def _list_cards(self, session, payload: dict) -> dict:
        return {"cards": [c.to_wire() for c in self._ideation.cards_of(session.workspace_id)]}

    # --- affinity ---

    def _generate_lenses(self, session, payload: dict) -> dict:
        scope = _field(payload, "scope", dict, required=False)
        lenses = self._affinity.generate_lenses(session.workspace_id, scope)
        return {"lenses": lenses}

    def _install_lens(self, session, payload: dict) -> dict:
        name = _field(payload, "name", str)
        candidate = self._affinity.candidate_named(session.workspace_id, name)
        revision, lens_id = self._affinity.install_lens(session.workspace_id, candidate, session.user)
        return {"lensId": lens_id, "name": name, "revision": revision}

    def _regroup(self, session, payload: dict) -> dict:
        lens_id = _field(payload, "lensId", str)
        revision = self._affinity.regroup_on_switch(session.workspace_id, lens_id, session.user)
        return {"lensId": lens_id, "revision": revision}

    def _suggest_dimensions(self, session, payload: dict) -> dict:
        group_id = _field(payload, "groupId", str)
        dimensions = self._affinity.suggest_dimensions(session.workspace_id, group_id)
        return {"groupId": group_id, "dimensions": dimensions}

    def _hierarchical_group(self, session, payload: dict) -> dict:
        group_id = _field(payload, "groupId", str)
        dimensions = _field(payload, "dimensions", list)
        return self._affinity.hierarchical_group(
            session.workspace_id, group_id, [str(d) for d in dimensions], actor=session.user
        )

    # --- speech ---

    def _extract_key_info(self, session, payload: dict) -> dict:
        cards = self._speech.extract_key_info(session.workspace_id)
        return {"cards": [c.to_wire() for c in cards]}

    def _retrieve_relevant(self, session, payload: dict) -> dict:
        cards = self._speech.retrieve_relevant_ideas(session.workspace_id)
        return {"cards": [c.to_wire() for c in cards]}

    def _card_to_note(self, session, payload: dict) -> dict:
        card_id = _field(payload, "cardId", str)
        revision, note_id = self._speech.card_to_note(session.workspace_id, card_id, session.user)
        return {"cardId": card_id, "noteId": note_id, "revision": revision}
