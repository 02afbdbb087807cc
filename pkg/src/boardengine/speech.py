"""Discussion support: recording lifecycle, transcription, extraction, retrieval.

One recording at a time per workspace; only the latest transcript is kept.
The recording flag itself lives in workspace state (SetRecording mutations),
so replicas agree on it; segments are streamed as transcriptSegment messages
and retained here for the extraction/retrieval requests that follow.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

from . import protocol
from .errors import EmptyTranscript, NoActiveRecording, UnknownReference
from .model import PAGE_MAIN, PROVENANCE_DISCUSSION_EXTRACTION, WorkspaceState
from .promptdata import notes_payload, transcript_payload

STATUS_RECORDING = "Recording"
STATUS_STOPPED = "Stopped"

ENGINE_ACTOR = "speech-pipeline"


@dataclass
class Transcript:
    recording_id: str
    started_at_ms: int
    segments: list[dict] = field(default_factory=list)
    status: str = STATUS_RECORDING

    def to_wire(self) -> dict:
        return {
            "recordingId": self.recording_id,
            "segments": list(self.segments),
            "status": self.status,
        }


@dataclass(frozen=True)
class KeyInfoCard:
    id: str
    summary: str
    related_note: Optional[str]
    relevance: float
    source_span: tuple[int, ...]

    def to_wire(self) -> dict:
        return {
            "cardId": self.id,
            "summary": self.summary,
            "relatedNote": self.related_note,
            "relevance": self.relevance,
            "sourceSpan": list(self.source_span),
        }


@dataclass(frozen=True)
class RelevantIdeaCard:
    note: str
    matched_sentence: str
    relevance: float

    def to_wire(self) -> dict:
        return {
            "note": self.note,
            "matchedSentence": self.matched_sentence,
            "relevance": self.relevance,
        }


class SpeechEngine:
    def __init__(self, hub, gateway, ids, clock):
        self._hub = hub
        self._gw = gateway
        self._ids = ids
        self._clock = clock
        self._transcripts: dict[str, Transcript] = {}  # latest per workspace
        self._key_cards: dict[str, dict[str, KeyInfoCard]] = {}
        self._lock = threading.Lock()

    # --- recording lifecycle ---

    def start_recording(self, workspace_id: str, actor: str) -> str:
        """Begin a recording; the SetRecording mutation rejects a second one."""
        recording_id = self._ids.recording_id()
        self._hub.submit_internal(
            workspace_id,
            {"kind": "SetRecording", "actor": actor, "payload": {"recordingId": recording_id}},
        )
        with self._lock:
            self._transcripts[workspace_id] = Transcript(
                recording_id=recording_id, started_at_ms=self._clock.now_ms()
            )
        return recording_id

    def stop_recording(self, workspace_id: str, actor: str) -> Transcript:
        """Freeze the transcript and clear the workspace recording flag."""
        active = self._hub.get_state(workspace_id).active_recording
        self._hub.submit_internal(
            workspace_id,
            {"kind": "SetRecording", "actor": actor, "payload": {"recordingId": None}},
        )
        with self._lock:
            transcript = self._transcripts.get(workspace_id)
            if transcript is None:
                # the recording flag was set without going through this engine;
                # hand back an empty, already-stopped transcript for it
                transcript = Transcript(
                    recording_id=active, started_at_ms=self._clock.now_ms(), status=STATUS_STOPPED
                )
                self._transcripts[workspace_id] = transcript
            else:
                transcript.status = STATUS_STOPPED
        return transcript

    def add_chunk(self, workspace_id: str, audio_b64: str) -> Optional[dict]:
        """Transcribe one audio chunk and broadcast the resulting segment.

        Returns the segment, or None when the chunk transcribes to nothing
        (silence); silent chunks append no segment.
        """
        with self._lock:
            transcript = self._transcripts.get(workspace_id)
            if transcript is None or transcript.status != STATUS_RECORDING:
                raise NoActiveRecording("no recording in progress")
        if self._hub.get_state(workspace_id).active_recording != transcript.recording_id:
            # stopped out from under us (snapshot load, raw mutation)
            with self._lock:
                transcript.status = STATUS_STOPPED
            raise NoActiveRecording("recording was stopped externally")
        text = self._gw.transcribe(audio_b64)
        if not text.strip():
            return None
        now = self._clock.now_ms()
        with self._lock:
            # re-check: a stop may have landed while we were transcribing
            if transcript.status != STATUS_RECORDING:
                raise NoActiveRecording("recording stopped while transcribing")
            offset = now - transcript.started_at_ms
            segment = {
                "index": len(transcript.segments),
                "text": text,
                "startMs": offset,
                "endMs": offset,
            }
            transcript.segments.append(segment)
            recording_id = transcript.recording_id
        self._hub.broadcast_transcript_segment(
            workspace_id,
            protocol.transcript_segment(
                recording_id, segment["index"], segment["text"], segment["startMs"], segment["endMs"]
            ),
        )
        return segment

    def transcript_of(self, workspace_id: str) -> Optional[Transcript]:
        with self._lock:
            return self._transcripts.get(workspace_id)

    def _require_transcript(self, workspace_id: str) -> Transcript:
        with self._lock:
            transcript = self._transcripts.get(workspace_id)
        if transcript is None or not transcript.segments:
            raise EmptyTranscript("no transcribed discussion to analyze")
        return transcript

    # --- analysis ---

    def extract_key_info(self, workspace_id: str) -> list[KeyInfoCard]:
        """Key points from the discussion, each tied to a note when one fits."""
        transcript = self._require_transcript(workspace_id)
        state: WorkspaceState = self._hub.get_state(workspace_id)
        notes = [n for n in state.notes.values() if n.page == PAGE_MAIN]
        payload, index = notes_payload(notes)
        result = self._gw.complete_structured(
            "key-info-extract",
            {"notes": payload, "transcript": transcript_payload(transcript.segments)},
            workspace_id=workspace_id,
        )
        threshold = state.settings.relevance_threshold
        cards: list[KeyInfoCard] = []
        for entry in result.value:
            if entry["relevance"] < threshold:
                continue  # below-threshold candidates are discarded
            related = index.get(entry["relatedNote"]) if entry["relatedNote"] is not None else None
            cards.append(
                KeyInfoCard(
                    id=self._ids.card_id(),
                    summary=entry["summary"],
                    related_note=related,
                    relevance=entry["relevance"],
                    source_span=tuple(entry["segments"]),
                )
            )
        with self._lock:
            registry = self._key_cards.setdefault(workspace_id, {})
            for card in cards:
                registry[card.id] = card
        return cards

    def retrieve_relevant_ideas(self, workspace_id: str) -> list[RelevantIdeaCard]:
        """The single most relevant transcript sentence per qualifying note."""
        transcript = self._require_transcript(workspace_id)
        state: WorkspaceState = self._hub.get_state(workspace_id)
        notes = [n for n in state.notes.values() if n.page == PAGE_MAIN]
        if not notes:
            return []
        payload, index = notes_payload(notes)
        result = self._gw.complete_structured(
            "relevant-idea-retrieve",
            {"notes": payload, "transcript": transcript_payload(transcript.segments)},
            workspace_id=workspace_id,
        )
        threshold = state.settings.relevance_threshold
        best: dict[str, RelevantIdeaCard] = {}
        order: list[str] = []
        for entry in result.value:
            note_id = index.get(entry["note"])
            if note_id is None:
                continue
            if entry["relevance"] <= threshold:
                continue  # strictly greater than threshold qualifies
            card = RelevantIdeaCard(
                note=note_id, matched_sentence=entry["sentence"], relevance=entry["relevance"]
            )
            held = best.get(note_id)
            if held is None:
                best[note_id] = card
                order.append(note_id)
            elif card.relevance > held.relevance:
                best[note_id] = card
        return [best[n] for n in order]

    def card_to_note(self, workspace_id: str, card_id: str, author: str) -> tuple[int, str]:
        """Turn a key-info card into a note carrying the summary verbatim."""
        with self._lock:
            card = self._key_cards.get(workspace_id, {}).get(card_id)
        if card is None:
            raise UnknownReference(f"no such key-info card: {card_id}")
        state = self._hub.get_state(workspace_id)
        x, y = 0.0, 0.0
        related = state.notes.get(card.related_note) if card.related_note else None
        if related is not None:
            x, y = related.x, related.y + 1.0
        note_id = self._ids.note_id()
        revision, _ = self._hub.submit_internal(
            workspace_id,
            {
                "kind": "CreateNote",
                "actor": author,
                "payload": {
                    "noteId": note_id,
                    "text": card.summary,
                    "x": x,
                    "y": y,
                    "provenance": PROVENANCE_DISCUSSION_EXTRACTION,
                },
            },
        )
        return revision, note_id
