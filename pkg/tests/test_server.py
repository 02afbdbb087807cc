"""HTTP/WebSocket shell: admin API, channel endpoint, configuration."""

from __future__ import annotations

import json
import socket

import pytest
from fastapi.testclient import TestClient

from boardengine import protocol
from boardengine.clock import SimulatedClock
from boardengine.errors import BadConfig, PortInUse
from boardengine.gateway import MockProvider
from boardengine.runtime import build_runtime
from boardengine.serialize import serialize_state
from boardengine.server import ServerConfig, create_app, serve

from tests.harness import FIXTURES_DIR

WS = "ws_w"


def make_app(tmp_path, **runtime_kwargs):
    runtime = build_runtime(
        MockProvider(FIXTURES_DIR),
        clock=SimulatedClock(),
        seed=1,
        data_dir=tmp_path / "data",
        **runtime_kwargs,
    )
    config = ServerConfig(mock_fixtures=FIXTURES_DIR, data_dir=tmp_path / "data")
    return create_app(config, runtime=runtime), runtime


def create_note(ws, seq, text, actor="Amy"):
    mutation = {"kind": "CreateNote", "actor": actor, "payload": {"text": text, "x": 0.0, "y": 0.0}}
    ws.send_text(json.dumps(protocol.submit_mutation_message(seq, mutation)))


class TestAdminApi:
    def test_healthz(self, tmp_path):
        """The health probe answers with a plain ok."""
        app, _ = make_app(tmp_path)
        with TestClient(app) as client:
            response = client.get("/api/healthz")
            assert response.status_code == 200
            assert response.text == "ok"

    def test_create_and_list_workspaces(self, tmp_path):
        """Created workspaces show up in the listing with their revisions."""
        app, _ = make_app(tmp_path)
        with TestClient(app) as client:
            created = client.post("/api/workspaces", json={"id": "ws_a"})
            assert created.status_code == 201
            assert created.json() == {"id": "ws_a", "revision": 0}
            listing = client.get("/api/workspaces").json()
            assert {"id": "ws_a", "revision": 0} in listing["workspaces"]

    def test_state_endpoint_returns_canonical_bytes(self, tmp_path):
        """The state endpoint body is exactly the canonical serialization."""
        app, runtime = make_app(tmp_path)
        with TestClient(app) as client:
            client.post("/api/workspaces", json={"id": "ws_a"})
            runtime.hub.submit_internal(
                "ws_a",
                {"kind": "CreateNote", "actor": "Amy", "payload": {"noteId": "n_hi", "text": "hi", "x": 0.0, "y": 0.0}},
            )
            response = client.get("/api/workspaces/ws_a/state")
            assert response.status_code == 200
            assert response.headers["content-type"].startswith("application/json")
            assert response.text == serialize_state(runtime.hub.get_state("ws_a"))

    def test_state_unknown_workspace_404(self, tmp_path):
        """Asking for an unknown workspace's state is a 404."""
        app, _ = make_app(tmp_path)
        with TestClient(app) as client:
            assert client.get("/api/workspaces/nope/state").status_code == 404

    def test_snapshot_roundtrip_over_http(self, tmp_path):
        """Save, list, and load snapshots through the admin API."""
        app, runtime = make_app(tmp_path)
        with TestClient(app) as client:
            client.post("/api/workspaces", json={"id": "ws_a"})
            runtime.hub.submit_internal(
                "ws_a",
                {"kind": "CreateNote", "actor": "Amy", "payload": {"noteId": "n_keep", "text": "keep", "x": 0.0, "y": 0.0}},
            )
            saved = client.post("/api/workspaces/ws_a/snapshots", json={"name": "before"})
            assert saved.status_code == 201
            assert saved.json()["revision"] == 1
            runtime.hub.submit_internal(
                "ws_a",
                {"kind": "CreateNote", "actor": "Amy", "payload": {"noteId": "n_extra", "text": "extra", "x": 0.0, "y": 0.0}},
            )
            listing = client.get("/api/workspaces/ws_a/snapshots").json()
            assert [s["name"] for s in listing["snapshots"]] == ["before"]
            loaded = client.post("/api/workspaces/ws_a/snapshots/before/load")
            assert loaded.status_code == 200
            assert loaded.json() == {"revision": 3}
            state = json.loads(client.get("/api/workspaces/ws_a/state").text)
            assert [n["text"] for n in state["notes"].values()] == ["keep"]

    def test_snapshot_error_statuses(self, tmp_path):
        """Name conflicts are 409, bad names 400, unknown snapshots 404."""
        app, _ = make_app(tmp_path)
        with TestClient(app) as client:
            client.post("/api/workspaces", json={"id": "ws_a"})
            assert client.post("/api/workspaces/ws_a/snapshots", json={"name": "x"}).status_code == 201
            assert client.post("/api/workspaces/ws_a/snapshots", json={"name": "x"}).status_code == 409
            assert client.post("/api/workspaces/ws_a/snapshots", json={"name": "   "}).status_code == 400
            assert client.post("/api/workspaces/ws_a/snapshots", json={}).status_code == 400
            assert client.post("/api/workspaces/ws_a/snapshots/ghost/load").status_code == 404
            assert client.get("/api/workspaces/nope/snapshots").status_code == 404

    def test_corrupt_snapshot_load_is_409(self, tmp_path):
        """Loading a snapshot whose payload no longer parses is a 409."""
        app, _ = make_app(tmp_path)
        with TestClient(app) as client:
            client.post("/api/workspaces", json={"id": "ws_a"})
            client.post("/api/workspaces/ws_a/snapshots", json={"name": "bad"})
            ws_dir = next(p for p in (tmp_path / "data").iterdir() if p.is_dir())
            index = json.loads((ws_dir / "index.json").read_text(encoding="utf-8"))
            payload_file = ws_dir / index["snapshots"][0]["file"]
            payload_file.write_text('{"formatVersion": 99}', encoding="utf-8")
            assert client.post("/api/workspaces/ws_a/snapshots/bad/load").status_code == 409

    def test_static_bundle_served_when_configured(self, tmp_path):
        """A configured app directory is mounted under /app."""
        bundle = tmp_path / "bundle"
        bundle.mkdir()
        (bundle / "index.html").write_text("<h1>board</h1>", encoding="utf-8")
        runtime = build_runtime(MockProvider(FIXTURES_DIR), clock=SimulatedClock(), seed=1)
        config = ServerConfig(mock_fixtures=FIXTURES_DIR, app_dir=bundle)
        app = create_app(config, runtime=runtime)
        with TestClient(app) as client:
            response = client.get("/app/")
            assert response.status_code == 200
            assert "board" in response.text


class TestChannelEndpoint:
    def test_join_then_mutation_reaches_both_clients(self, tmp_path):
        """Two sockets on one workspace both see a submitted mutation."""
        app, _ = make_app(tmp_path)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as a, client.websocket_connect("/ws") as b:
                a.send_text(json.dumps(protocol.join_message("Amy", WS)))
                snap_a = a.receive_json()
                assert snap_a["type"] == "joinSnapshot"
                assert snap_a["revision"] == 0
                b.send_text(json.dumps(protocol.join_message("Bo", WS)))
                assert b.receive_json()["type"] == "joinSnapshot"

                create_note(a, 1, "hello")
                got_a = {a.receive_json()["type"], a.receive_json()["type"]}
                assert got_a == {"mutationApplied", "ack"}
                applied_b = b.receive_json()
                assert applied_b["type"] == "mutationApplied"
                assert applied_b["mutation"]["payload"]["text"] == "hello"
                assert applied_b["serverRevision"] == 1

    def test_first_message_must_be_join(self, tmp_path):
        """A socket that speaks before joining is told to join first."""
        app, _ = make_app(tmp_path)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps(protocol.ping_message()))
                error = ws.receive_json()
                assert error["type"] == "error"
                assert "join" in error["detail"]

    def test_invalid_json_after_join_is_reported(self, tmp_path):
        """Garbage frames draw a protocol error instead of killing the socket."""
        app, _ = make_app(tmp_path)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps(protocol.join_message("Amy", WS)))
                ws.receive_json()
                ws.send_text("{nope")
                error = ws.receive_json()
                assert error["type"] == "error"
                assert error["code"] == "protocol-error"
                ws.send_text(json.dumps(protocol.ping_message()))
                assert ws.receive_json()["type"] == "pong"

    def test_ai_request_round_trip(self, tmp_path):
        """An aiRequest over the socket comes back as a broadcast aiResult."""
        app, _ = make_app(tmp_path)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps(protocol.join_message("Amy", WS)))
                ws.receive_json()
                ws.send_text(json.dumps(protocol.ai_request_message("listCards", {}, "r1")))
                result = ws.receive_json()
                assert result["type"] == "aiResult"
                assert result["kind"] == "listCards"
                assert result["requestId"] == "r1"
                assert result["payload"] == {"cards": []}

    def test_join_unknown_workspace_without_autocreate(self, tmp_path):
        """With auto-create off, joining an unknown workspace errors out."""
        app, _ = make_app(tmp_path, auto_create=False)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps(protocol.join_message("Amy", "ghost")))
                error = ws.receive_json()
                assert error["type"] == "error"
                assert error["code"] == "unknown-workspace"

    def test_disconnect_releases_the_session(self, tmp_path):
        """Closing the socket removes the session from the workspace."""
        app, runtime = make_app(tmp_path)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps(protocol.join_message("Amy", WS)))
                ws.receive_json()
                assert len(runtime.hub.sessions_of(WS)) == 1
            assert len(runtime.hub.sessions_of(WS)) == 0


class TestConfigValidation:
    def test_mock_fixtures_directory_must_exist(self, tmp_path):
        """Pointing at a missing fixtures directory is a configuration error."""
        with pytest.raises(BadConfig, match="fixtures"):
            ServerConfig(mock_fixtures=tmp_path / "nope").validate()

    def test_live_mode_requires_api_key(self, monkeypatch):
        """Without fixtures, the provider key env var must be present."""
        monkeypatch.delenv("BOARD_AI_API_KEY", raising=False)
        with pytest.raises(BadConfig, match="BOARD_AI_API_KEY"):
            ServerConfig().validate()
        monkeypatch.setenv("BOARD_AI_API_KEY", "k")
        ServerConfig().validate()

    def test_mock_mode_needs_no_key(self, monkeypatch):
        """Fixture-backed mode validates without any provider credentials."""
        monkeypatch.delenv("BOARD_AI_API_KEY", raising=False)
        ServerConfig(mock_fixtures=FIXTURES_DIR).validate()

    def test_busy_port_is_reported(self, tmp_path):
        """A taken port surfaces as a dedicated error before serving starts."""
        blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        blocker.bind(("0.0.0.0", 0))
        port = blocker.getsockname()[1]
        try:
            config = ServerConfig(
                port=port, data_dir=tmp_path / "data", mock_fixtures=FIXTURES_DIR
            )
            with pytest.raises(PortInUse):
                serve(config)
        finally:
            blocker.close()
