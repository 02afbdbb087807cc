"""Session and workspace hub: total ordering, acks, and broadcast fan-out.

The hub is transport-agnostic: a session is any object with a ``send(dict)``
method. All mutations for one workspace are applied under that workspace's
lock, and the resulting mutationApplied broadcast happens under the same
lock, so every session observes revisions in strictly increasing order with
no gaps after its join snapshot. Different workspaces proceed in parallel.

Client-submitted create mutations get their ids assigned here, before the
mutation is applied or logged; the client learns the real ids from the
broadcast. Engine-submitted mutations arrive with ids already minted from
the same factory.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol

from . import protocol
from .clock import Clock, SystemClock
from .errors import BoardError, UnknownWorkspace
from .ids import IdFactory
from .model import WorkspaceState, empty_state
from .mutations import (
    CREATE_GROUP,
    CREATE_NOTE,
    INSTALL_LENS_PAGE,
    Mutation,
    apply_mutation,
)
from .serialize import state_to_doc

HEARTBEAT_TIMEOUT_MS = 30_000


class Channel(Protocol):
    def send(self, message: dict) -> None:
        ...


class LoopbackChannel:
    """In-process channel: collects messages, optionally forwarding them."""

    def __init__(self, name: str = "", on_message: Optional[Callable[[dict], None]] = None):
        self.name = name
        self._lock = threading.Lock()
        self._messages: list[dict] = []
        self._on_message = on_message

    def send(self, message: dict) -> None:
        with self._lock:
            self._messages.append(message)
        if self._on_message is not None:
            self._on_message(message)

    @property
    def messages(self) -> list[dict]:
        with self._lock:
            return list(self._messages)

    def drain(self) -> list[dict]:
        with self._lock:
            out = list(self._messages)
            self._messages.clear()
        return out


@dataclass
class Session:
    id: str
    user: str
    workspace_id: str
    channel: Channel
    last_seen_ms: int
    last_client_seq: int = 0
    last_acked_revision: int = 0


@dataclass
class _Workspace:
    state: WorkspaceState
    lock: threading.RLock = field(default_factory=threading.RLock)
    sessions: dict[str, Session] = field(default_factory=dict)
    log: list[dict] = field(default_factory=list)


class WorkspaceHub:
    def __init__(
        self,
        id_factory: Optional[IdFactory] = None,
        clock: Optional[Clock] = None,
        auto_create: bool = True,
    ):
        self._clock = clock or SystemClock()
        self._ids = id_factory or IdFactory(self._clock)
        self._auto_create = auto_create
        self._registry_lock = threading.Lock()
        self._workspaces: dict[str, _Workspace] = {}

    @property
    def ids(self) -> IdFactory:
        return self._ids

    @property
    def clock(self) -> Clock:
        return self._clock

    # --- workspace registry ---

    def _lookup(self, workspace_id: str) -> _Workspace:
        with self._registry_lock:
            ws = self._workspaces.get(workspace_id)
        if ws is None:
            raise UnknownWorkspace(f"no such workspace: {workspace_id}")
        return ws

    def _get_or_create(self, workspace_id: Optional[str]) -> tuple[str, _Workspace]:
        with self._registry_lock:
            if workspace_id is not None and workspace_id in self._workspaces:
                return workspace_id, self._workspaces[workspace_id]
            if workspace_id is None:
                workspace_id = self._ids.workspace_id()
            elif not self._auto_create:
                raise UnknownWorkspace(f"no such workspace: {workspace_id}")
            ws = _Workspace(state=empty_state(workspace_id))
            self._workspaces[workspace_id] = ws
            return workspace_id, ws

    def ensure_workspace(self, workspace_id: Optional[str] = None) -> str:
        wid, _ = self._get_or_create(workspace_id)
        return wid

    def list_workspaces(self) -> list[tuple[str, int]]:
        with self._registry_lock:
            items = list(self._workspaces.items())
        return [(wid, ws.state.revision) for wid, ws in items]

    def get_state(self, workspace_id: str) -> WorkspaceState:
        return self._lookup(workspace_id).state

    def sessions_of(self, workspace_id: str) -> list[Session]:
        ws = self._lookup(workspace_id)
        with ws.lock:
            return list(ws.sessions.values())

    # --- session lifecycle ---

    def join(self, channel: Channel, user: str, workspace_id: Optional[str] = None) -> Session:
        """Register a session and send it the full-state snapshot.

        Registration and snapshot happen under the workspace lock, so the
        first streamed mutation is exactly snapshot revision + 1.
        """
        wid, ws = self._get_or_create(workspace_id)
        session = Session(
            id=self._ids.session_id(),
            user=user,
            workspace_id=wid,
            channel=channel,
            last_seen_ms=self._clock.now_ms(),
        )
        with ws.lock:
            ws.sessions[session.id] = session
            channel.send(protocol.join_snapshot(session.id, state_to_doc(ws.state)))
        return session

    def leave(self, session: Session) -> None:
        try:
            ws = self._lookup(session.workspace_id)
        except UnknownWorkspace:
            return
        with ws.lock:
            ws.sessions.pop(session.id, None)

    def touch(self, session: Session) -> None:
        session.last_seen_ms = self._clock.now_ms()

    def sweep(self, timeout_ms: int = HEARTBEAT_TIMEOUT_MS) -> list[Session]:
        """Drop sessions silent for longer than the heartbeat timeout."""
        now = self._clock.now_ms()
        dropped: list[Session] = []
        with self._registry_lock:
            workspaces = list(self._workspaces.values())
        for ws in workspaces:
            with ws.lock:
                for session in list(ws.sessions.values()):
                    if now - session.last_seen_ms > timeout_ms:
                        del ws.sessions[session.id]
                        dropped.append(session)
        return dropped

    # --- mutation path ---

    def _assign_ids(self, m: Mutation) -> Mutation:
        payload = dict(m.payload)
        if m.kind == CREATE_NOTE:
            payload["noteId"] = self._ids.note_id()
        elif m.kind == CREATE_GROUP:
            payload["groupId"] = self._ids.group_id()
        elif m.kind == INSTALL_LENS_PAGE and isinstance(payload.get("lens"), dict):
            payload["lens"] = dict(payload["lens"], id=self._ids.lens_id())
        else:
            return m
        return replace(m, payload=payload)

    def submit(self, session: Session, client_seq: int, mutation_doc: dict) -> None:
        """Client submission: exactly one ack or error per clientSeq."""
        ws = self._lookup(session.workspace_id)
        with ws.lock:
            if client_seq <= session.last_client_seq:
                session.channel.send(
                    protocol.error_message(
                        "bad-sequence",
                        f"clientSeq {client_seq} already consumed (last was {session.last_client_seq})",
                        client_seq=client_seq,
                    )
                )
                return
            session.last_client_seq = client_seq
            try:
                mutation = self._assign_ids(Mutation.from_wire(mutation_doc))
                revision, events = self._apply_locked(ws, mutation, session.id, client_seq)
            except BoardError as exc:
                session.channel.send(
                    protocol.error_message(exc.code, exc.detail or str(exc), client_seq=client_seq)
                )
                return
            session.channel.send(protocol.ack(client_seq, revision))
            session.last_acked_revision = revision

    def submit_internal(self, workspace_id: str, mutation) -> tuple[int, list]:
        """Engine submission: ids pre-minted, no ack, errors raised."""
        if isinstance(mutation, dict):
            mutation = Mutation.from_wire(mutation)
        ws = self._lookup(workspace_id)
        with ws.lock:
            return self._apply_locked(ws, mutation, None, None)

    def _apply_locked(
        self,
        ws: _Workspace,
        mutation: Mutation,
        origin_session: Optional[str],
        client_seq: Optional[int],
    ) -> tuple[int, list]:
        new_state, events = apply_mutation(ws.state, mutation)
        ws.state = new_state
        wire = mutation.to_wire()
        ws.log.append({"revision": new_state.revision, "mutation": wire, "events": events})
        message = protocol.mutation_applied(
            new_state.revision, wire, events, origin_session, client_seq
        )
        for other in ws.sessions.values():
            other.channel.send(message)
        return new_state.revision, events

    # --- broadcast paths for engines ---

    def broadcast_ai_result(
        self,
        workspace_id: str,
        kind: str,
        payload: dict,
        base_revision: int,
        request_id: Optional[str] = None,
    ) -> int:
        """Deliver an AI result to every session; returns the delivery count."""
        ws = self._lookup(workspace_id)
        message = protocol.ai_result(kind, payload, base_revision, request_id)
        with ws.lock:
            targets = list(ws.sessions.values())
            for session in targets:
                session.channel.send(message)
        return len(targets)

    def broadcast_transcript_segment(self, workspace_id: str, segment: dict) -> int:
        ws = self._lookup(workspace_id)
        with ws.lock:
            targets = list(ws.sessions.values())
            for session in targets:
                session.channel.send(segment)
        return len(targets)

    # --- snapshot restore ---

    def restore_state(self, workspace_id: str, content: WorkspaceState) -> int:
        """Replace workspace content wholesale, keeping revision monotone.

        The restored state keeps the workspace id, takes revision old+1, and
        never carries an active recording. Every session receives a fresh
        join snapshot since incremental reconciliation is pointless here.
        """
        ws = self._lookup(workspace_id)
        with ws.lock:
            new_state = replace(
                content,
                id=ws.state.id,
                revision=ws.state.revision + 1,
                active_recording=None,
            )
            ws.state = new_state
            ws.log.append({"revision": new_state.revision, "mutation": None, "events": [{"event": "state-restored"}]})
            for session in ws.sessions.values():
                session.channel.send(protocol.join_snapshot(session.id, state_to_doc(new_state)))
            return new_state.revision
