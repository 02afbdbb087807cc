"""HTTP/WebSocket front for the board engine.

One process serves three surfaces on the same port: the WebSocket channel
endpoint at ``/ws`` that real clients speak the wire protocol over, a small
JSON admin API under ``/api``, and (when a bundle directory exists) the
static browser client under ``/app``.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
import socket
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles

from . import protocol
from .errors import (
    BadConfig,
    BoardError,
    CorruptSnapshot,
    InvariantViolation,
    NameExists,
    PortInUse,
    ProtocolError,
    UnknownSnapshot,
    UnknownWorkspace,
)
from .gateway.providers import API_KEY_ENV, LiveHttpProvider, MockProvider
from .runtime import BoardRuntime, build_runtime
from .serialize import serialize_state

log = logging.getLogger(__name__)

SCHEDULER_TICK_S = 0.5
SWEEP_EVERY_S = 5.0


@dataclass
class ServerConfig:
    port: int = 8787
    data_dir: Path = Path("data")
    mock_fixtures: Optional[Path] = None  # mock provider when set, live otherwise
    hint_interval_ms: Optional[int] = None
    auto_create: bool = True
    log_level: str = "info"
    app_dir: Optional[Path] = None  # static client bundle, autodetected when unset

    def validate(self) -> None:
        if self.mock_fixtures is not None:
            if not Path(self.mock_fixtures).is_dir():
                raise BadConfig(f"mock fixtures directory not found: {self.mock_fixtures}")
        elif not os.environ.get(API_KEY_ENV):
            raise BadConfig(
                f"live provider mode needs {API_KEY_ENV} set; pass --mock-fixtures to run without one"
            )

    def resolved_app_dir(self) -> Optional[Path]:
        if self.app_dir is not None:
            return self.app_dir if Path(self.app_dir).is_dir() else None
        default = Path("frontend") / "dist"
        return default if default.is_dir() else None


def make_provider(config: ServerConfig):
    if config.mock_fixtures is not None:
        return MockProvider(config.mock_fixtures)
    return LiveHttpProvider()


class _SocketChannel:
    """Bridges engine threads to one WebSocket via the event loop's queue."""

    _CLOSE = object()

    def __init__(self, loop: asyncio.AbstractEventLoop):
        self._loop = loop
        self.queue: asyncio.Queue = asyncio.Queue()

    def send(self, msg: dict) -> None:
        self._loop.call_soon_threadsafe(self.queue.put_nowait, msg)

    def close(self) -> None:
        self._loop.call_soon_threadsafe(self.queue.put_nowait, self._CLOSE)


def create_app(config: ServerConfig, runtime: Optional[BoardRuntime] = None) -> FastAPI:
    if runtime is None:
        runtime = build_runtime(
            make_provider(config),
            auto_create=config.auto_create,
            data_dir=config.data_dir,
            hint_interval_ms=config.hint_interval_ms,
        )

    async def lifespan(app: FastAPI):
        tasks = [
            asyncio.create_task(_scheduler_loop(runtime)),
            asyncio.create_task(_sweep_loop(runtime)),
        ]
        try:
            yield
        finally:
            for task in tasks:
                task.cancel()
            await asyncio.gather(*tasks, return_exceptions=True)
            log.info("shutdown: snapshot index is write-through, nothing left to flush")

    app = FastAPI(lifespan=lifespan)
    app.state.runtime = runtime

    # --- admin API ---

    @app.get("/api/healthz", response_class=PlainTextResponse)
    async def healthz() -> str:
        return "ok"

    @app.get("/api/workspaces")
    async def list_workspaces() -> dict:
        rows = [{"id": wid, "revision": rev} for wid, rev in sorted(runtime.hub.list_workspaces())]
        return {"workspaces": rows}

    @app.post("/api/workspaces", status_code=201)
    async def create_workspace(body: Optional[dict] = None) -> dict:
        requested = (body or {}).get("id")
        wid = runtime.hub.ensure_workspace(requested)
        return {"id": wid, "revision": runtime.hub.get_state(wid).revision}

    @app.get("/api/workspaces/{workspace_id}/state")
    async def workspace_state(workspace_id: str) -> Response:
        state = _state_or_404(runtime, workspace_id)
        return Response(content=serialize_state(state), media_type="application/json")

    @app.get("/api/workspaces/{workspace_id}/snapshots")
    async def list_snapshots(workspace_id: str) -> dict:
        _state_or_404(runtime, workspace_id)
        return {"snapshots": _store(runtime).list(workspace_id)}

    @app.post("/api/workspaces/{workspace_id}/snapshots", status_code=201)
    async def save_snapshot(workspace_id: str, body: dict) -> dict:
        _state_or_404(runtime, workspace_id)
        name = body.get("name")
        if not isinstance(name, str):
            raise HTTPException(400, "body needs a string 'name'")
        try:
            return await asyncio.to_thread(
                _store(runtime).save, workspace_id, name, bool(body.get("overwrite", False))
            )
        except NameExists as exc:
            raise HTTPException(409, str(exc)) from exc
        except InvariantViolation as exc:
            raise HTTPException(400, str(exc)) from exc

    @app.post("/api/workspaces/{workspace_id}/snapshots/{name}/load")
    async def load_snapshot(workspace_id: str, name: str) -> dict:
        _state_or_404(runtime, workspace_id)
        try:
            revision = await asyncio.to_thread(_store(runtime).load, workspace_id, name)
        except UnknownSnapshot as exc:
            raise HTTPException(404, str(exc)) from exc
        except CorruptSnapshot as exc:
            raise HTTPException(409, str(exc)) from exc
        return {"revision": revision}

    # --- the channel endpoint ---

    @app.websocket("/ws")
    async def channel(websocket: WebSocket) -> None:
        await websocket.accept()
        loop = asyncio.get_running_loop()
        chan = _SocketChannel(loop)
        session = None
        writer = asyncio.create_task(_writer_loop(websocket, chan.queue))
        pending: set[asyncio.Task] = set()
        try:
            session = await _handshake(websocket, chan, runtime)
            if session is None:
                return
            while True:
                raw = await websocket.receive_text()
                msg = _parse_or_report(raw, chan)
                if msg is None:
                    continue
                if msg["type"] == "aiRequest":
                    # slow provider work must not block this session's edits
                    task = asyncio.create_task(
                        asyncio.to_thread(runtime.dispatcher.handle, session, msg)
                    )
                    pending.add(task)
                    task.add_done_callback(pending.discard)
                else:
                    await asyncio.to_thread(runtime.dispatcher.handle, session, msg)
        except WebSocketDisconnect:
            pass
        finally:
            if session is not None:
                runtime.hub.leave(session)
            for task in pending:
                task.cancel()
            chan.close()
            try:
                await writer
            except asyncio.CancelledError:
                pass

    # --- static client ---

    app_dir = config.resolved_app_dir()
    if app_dir is not None:
        app.mount("/app", StaticFiles(directory=app_dir, html=True), name="app")

    return app


def _store(runtime: BoardRuntime):
    if runtime.store is None:
        raise HTTPException(503, "snapshot storage is not configured")
    return runtime.store


def _state_or_404(runtime: BoardRuntime, workspace_id: str):
    try:
        return runtime.hub.get_state(workspace_id)
    except UnknownWorkspace as exc:
        raise HTTPException(404, f"no such workspace: {workspace_id}") from exc


async def _handshake(websocket: WebSocket, chan: _SocketChannel, runtime: BoardRuntime):
    """First inbound message must be a join; returns the session or None."""
    raw = await websocket.receive_text()
    msg = _parse_or_report(raw, chan)
    if msg is None or msg["type"] != "join":
        chan.send(protocol.error_message("protocol-error", "first message must be a join"))
        return None
    try:
        return runtime.hub.join(chan, msg["user"], msg.get("workspace"))
    except UnknownWorkspace as exc:
        chan.send(protocol.error_message(exc.code, str(exc)))
        return None


def _parse_or_report(raw: str, chan: _SocketChannel) -> Optional[dict]:
    try:
        return protocol.parse_client_message(json.loads(raw))
    except json.JSONDecodeError as exc:
        chan.send(protocol.error_message("protocol-error", f"message is not valid JSON: {exc}"))
    except ProtocolError as exc:
        chan.send(protocol.error_message(exc.code, str(exc)))
    return None


async def _writer_loop(websocket: WebSocket, queue: asyncio.Queue) -> None:
    while True:
        msg = await queue.get()
        if msg is _SocketChannel._CLOSE:
            return
        try:
            await websocket.send_text(json.dumps(msg, ensure_ascii=False))
        except Exception:  # noqa: BLE001 - peer gone; reader will notice too
            return


async def _scheduler_loop(runtime: BoardRuntime) -> None:
    while True:
        await asyncio.sleep(SCHEDULER_TICK_S)
        try:
            await asyncio.to_thread(runtime.tick_schedulers)
        except Exception:  # noqa: BLE001 - keep the beat going
            log.exception("hint scheduler tick failed")


async def _sweep_loop(runtime: BoardRuntime) -> None:
    while True:
        await asyncio.sleep(SWEEP_EVERY_S)
        try:
            dropped = runtime.hub.sweep()
            if dropped:
                log.info("dropped %d silent session(s)", len(dropped))
        except Exception:  # noqa: BLE001
            log.exception("session sweep failed")


def serve(config: ServerConfig) -> None:
    """Run the server until it is told to stop (SIGINT/SIGTERM)."""
    import uvicorn

    config.validate()
    app = create_app(config)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind(("0.0.0.0", config.port))
    except OSError as exc:
        sock.close()
        raise PortInUse(f"port {config.port} is already taken: {exc}") from exc
    sock.listen(128)
    log.info("listening on port %d", config.port)
    server = uvicorn.Server(
        uvicorn.Config(app, log_level=config.log_level.lower(), lifespan="on")
    )
    server.run(sockets=[sock])
