"""Wire protocol: JSON messages with a `type` discriminator, proto version 1.

Client to server: join, submitMutation, aiRequest, startRecording,
stopRecording, audioChunk, ping. Server to client: joinSnapshot,
mutationApplied, ack, aiResult, transcriptSegment, error, pong. The same
schema is used over WebSockets and the in-process loopback transport; the
full catalog is documented in docs/protocol.md.
"""

from __future__ import annotations

from typing import Any, Optional

from .errors import ProtocolError

PROTO_VERSION = 1

CLIENT_TYPES = frozenset(
    {"join", "submitMutation", "aiRequest", "startRecording", "stopRecording", "audioChunk", "ping"}
)


# --- client -> server builders (used by tests, replay, and docs) -------------

def join_message(user: str, workspace: Optional[str] = None) -> dict:
    return {"type": "join", "proto": PROTO_VERSION, "user": user, "workspace": workspace}


def submit_mutation_message(client_seq: int, mutation: dict) -> dict:
    return {
        "type": "submitMutation",
        "proto": PROTO_VERSION,
        "clientSeq": client_seq,
        "mutation": mutation,
    }


def ai_request_message(kind: str, payload: dict, request_id: Optional[str] = None) -> dict:
    msg = {"type": "aiRequest", "proto": PROTO_VERSION, "kind": kind, "payload": payload}
    if request_id is not None:
        msg["requestId"] = request_id
    return msg


def start_recording_message() -> dict:
    return {"type": "startRecording", "proto": PROTO_VERSION}


def stop_recording_message() -> dict:
    return {"type": "stopRecording", "proto": PROTO_VERSION}


def audio_chunk_message(audio_b64: str) -> dict:
    return {"type": "audioChunk", "proto": PROTO_VERSION, "audio": audio_b64}


def ping_message() -> dict:
    return {"type": "ping", "proto": PROTO_VERSION}


# --- server -> client builders ------------------------------------------------

def join_snapshot(session_id: str, state_doc: dict) -> dict:
    return {
        "type": "joinSnapshot",
        "proto": PROTO_VERSION,
        "sessionId": session_id,
        "revision": state_doc["revision"],
        "state": state_doc,
    }


def mutation_applied(
    server_revision: int,
    mutation: dict,
    events: list,
    origin_session: Optional[str],
    client_seq: Optional[int],
) -> dict:
    return {
        "type": "mutationApplied",
        "proto": PROTO_VERSION,
        "serverRevision": server_revision,
        "mutation": mutation,
        "actor": mutation["actor"],
        "events": events,
        "originSession": origin_session,
        "clientSeq": client_seq,
    }


def ack(client_seq: int, server_revision: int) -> dict:
    return {
        "type": "ack",
        "proto": PROTO_VERSION,
        "clientSeq": client_seq,
        "serverRevision": server_revision,
    }


def ai_result(kind: str, payload: dict, base_revision: int, request_id: Optional[str]) -> dict:
    return {
        "type": "aiResult",
        "proto": PROTO_VERSION,
        "kind": kind,
        "payload": payload,
        "baseRevision": base_revision,
        "requestId": request_id,
    }


def transcript_segment(recording_id: str, index: int, text: str, start_ms: int, end_ms: int) -> dict:
    return {
        "type": "transcriptSegment",
        "proto": PROTO_VERSION,
        "recordingId": recording_id,
        "index": index,
        "text": text,
        "startMs": start_ms,
        "endMs": end_ms,
    }


def error_message(
    code: str,
    detail: str,
    client_seq: Optional[int] = None,
    request_id: Optional[str] = None,
) -> dict:
    msg = {"type": "error", "proto": PROTO_VERSION, "code": code, "detail": detail}
    if client_seq is not None:
        msg["clientSeq"] = client_seq
    if request_id is not None:
        msg["requestId"] = request_id
    return msg


def pong_message() -> dict:
    return {"type": "pong", "proto": PROTO_VERSION}


# --- validation -----------------------------------------------------------------

def _require(msg: dict, field: str, kinds, what: str) -> Any:
    if field not in msg:
        raise ProtocolError(f"{what} message missing field {field!r}")
    value = msg[field]
    if not isinstance(value, kinds):
        raise ProtocolError(f"{what} field {field!r} has the wrong type")
    return value


def parse_client_message(msg: Any) -> dict:
    """Validate an inbound client message, returning it unchanged."""
    if not isinstance(msg, dict):
        raise ProtocolError("message must be a JSON object")
    mtype = msg.get("type")
    if mtype not in CLIENT_TYPES:
        raise ProtocolError(f"unknown message type: {mtype!r}")
    proto = msg.get("proto", PROTO_VERSION)
    if proto != PROTO_VERSION:
        raise ProtocolError(f"unsupported protocol version: {proto!r}")
    if mtype == "join":
        user = _require(msg, "user", str, "join")
        if not user:
            raise ProtocolError("join user must be non-empty")
        workspace = msg.get("workspace")
        if workspace is not None and not isinstance(workspace, str):
            raise ProtocolError("join workspace must be a string or null")
    elif mtype == "submitMutation":
        seq = _require(msg, "clientSeq", int, "submitMutation")
        if isinstance(seq, bool) or seq < 1:
            raise ProtocolError("clientSeq must be a positive integer")
        _require(msg, "mutation", dict, "submitMutation")
    elif mtype == "aiRequest":
        kind = _require(msg, "kind", str, "aiRequest")
        if not kind:
            raise ProtocolError("aiRequest kind must be non-empty")
        _require(msg, "payload", dict, "aiRequest")
        request_id = msg.get("requestId")
        if request_id is not None and not isinstance(request_id, str):
            raise ProtocolError("aiRequest requestId must be a string")
    elif mtype == "audioChunk":
        _require(msg, "audio", str, "audioChunk")
    return msg
