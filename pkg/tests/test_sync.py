"""Hub behaviour: ordering, acks, broadcasts, membership, convergence."""

import random
import threading
import time

import pytest

from boardengine.clock import SimulatedClock
from boardengine.errors import UnknownWorkspace
from boardengine.serialize import serialize_state
from boardengine.sync import HEARTBEAT_TIMEOUT_MS, LoopbackChannel, WorkspaceHub

from tests.harness import Replica, ScriptedClient, run_convergence_session


def make_hub(**kw):
    return WorkspaceHub(**kw)


# --- joining ---


class TestJoin:
    def test_join_fresh_workspace_gets_empty_snapshot(self):
        """First join auto-creates a workspace and snapshots revision 0."""
        hub = make_hub()
        r = Replica("alice")
        session = hub.join(r.channel, "alice")
        assert session.workspace_id.startswith("ws_")
        assert r.seen_revisions == [0]
        assert r.state.revision == 0
        assert r.state.notes == {}

    def test_join_existing_workspace_sees_current_state(self):
        """A late joiner's snapshot carries every earlier mutation."""
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        for i in range(5):
            a.submit("CreateNote", text=f"note {i}", x=0.0, y=0.0)
        b = Replica("bob")
        hub.join(b.channel, "bob", a.workspace_id)
        assert b.seen_revisions == [5]
        assert len(b.state.notes) == 5
        assert b.serialized() == serialize_state(hub.get_state(a.workspace_id))

    def test_join_unknown_workspace_without_autocreate(self):
        """auto_create=False turns unknown ids into an error."""
        hub = make_hub(auto_create=False)
        with pytest.raises(UnknownWorkspace):
            hub.join(Replica("x").channel, "x", "ws_NOPE")

    def test_ensure_workspace_is_idempotent(self):
        hub = make_hub()
        wid = hub.ensure_workspace("ws_a")
        assert hub.ensure_workspace("ws_a") == wid
        assert hub.list_workspaces() == [("ws_a", 0)]

    def test_sessions_get_distinct_ids(self):
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        b = ScriptedClient(hub, "bob", a.workspace_id)
        assert a.session.id != b.session.id
        assert {s.user for s in hub.sessions_of(a.workspace_id)} == {"alice", "bob"}


# --- submission, acks, errors ---


class TestSubmit:
    def test_ack_carries_seq_and_revision(self):
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        seq = a.submit("CreateNote", text="hi", x=1.0, y=2.0)
        assert a.replica.acks == [
            {"type": "ack", "proto": 1, "clientSeq": seq, "serverRevision": 1}
        ]

    def test_server_overwrites_client_note_ids(self):
        """Clients cannot pick ids; the hub substitutes its own."""
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        hub.submit(
            a.session,
            1,
            {"kind": "CreateNote", "actor": "alice", "payload": {"text": "x", "x": 0.0, "y": 0.0, "noteId": "note_EVIL"}},
        )
        assert "note_EVIL" not in a.replica.state.notes
        assert len(a.replica.state.notes) == 1
        assert next(iter(a.replica.state.notes)).startswith("note_")

    def test_rejected_mutation_sends_error_not_ack(self):
        """A dangling reference leaves revision untouched and errors once."""
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        a.submit("EditNoteText", noteId="note_MISSING", text="x")
        assert a.replica.acks == []
        assert len(a.replica.errors) == 1
        err = a.replica.errors[0]
        assert err["code"] == "unknown-reference"
        assert err["clientSeq"] == 1
        assert hub.get_state(a.workspace_id).revision == 0

    def test_error_does_not_burn_the_sequence_slot_twice(self):
        """After an error the same client continues with the next seq."""
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        a.submit("EditNoteText", noteId="note_MISSING", text="x")
        seq = a.submit("CreateNote", text="ok", x=0.0, y=0.0)
        assert a.replica.acks[-1]["clientSeq"] == seq
        assert a.replica.acks[-1]["serverRevision"] == 1

    def test_duplicate_client_seq_rejected(self):
        """Replayed or reordered seqs get a bad-sequence error, no reapply."""
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        hub.submit(a.session, 1, {"kind": "CreateNote", "actor": "alice", "payload": {"text": "a", "x": 0.0, "y": 0.0}})
        hub.submit(a.session, 1, {"kind": "CreateNote", "actor": "alice", "payload": {"text": "b", "x": 0.0, "y": 0.0}})
        assert len(a.replica.acks) == 1
        assert len(a.replica.errors) == 1
        assert a.replica.errors[0]["code"] == "bad-sequence"
        assert hub.get_state(a.workspace_id).revision == 1

    def test_stale_client_seq_rejected(self):
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        hub.submit(a.session, 5, {"kind": "CreateNote", "actor": "alice", "payload": {"text": "a", "x": 0.0, "y": 0.0}})
        hub.submit(a.session, 3, {"kind": "CreateNote", "actor": "alice", "payload": {"text": "b", "x": 0.0, "y": 0.0}})
        assert a.replica.errors[0]["code"] == "bad-sequence"

    def test_exactly_one_response_per_submission(self):
        """Every submit yields precisely one ack or one error."""
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        rng = random.Random(7)
        n = 60
        for _ in range(n):
            if rng.random() < 0.3:
                a.submit("EditNoteText", noteId="note_MISSING", text="x")
            else:
                a.submit("CreateNote", text="y", x=0.0, y=0.0)
        assert len(a.replica.acks) + len(a.replica.errors) == n
        answered = sorted(m["clientSeq"] for m in a.replica.acks + a.replica.errors)
        assert answered == list(range(1, n + 1))

    def test_submit_internal_bypasses_sessions(self):
        """Engine-side mutations need no session and keep their ids."""
        hub = make_hub()
        wid = hub.ensure_workspace("ws_i")
        rev, events = hub.submit_internal(
            wid,
            {"kind": "CreateNote", "actor": "engine", "payload": {"text": "seeded", "x": 0.0, "y": 0.0, "noteId": "note_FIXED"}},
        )
        assert rev == 1
        assert "note_FIXED" in hub.get_state(wid).notes
        assert events[0]["noteId"] == "note_FIXED"


# --- broadcast ---


class TestBroadcast:
    def test_mutation_reaches_every_session(self):
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        b = ScriptedClient(hub, "bob", a.workspace_id)
        c = ScriptedClient(hub, "cara", a.workspace_id)
        a.submit("CreateNote", text="shared", x=0.0, y=0.0)
        for client in (a, b, c):
            assert len(client.replica.state.notes) == 1
        # only the author is acked
        assert len(a.replica.acks) == 1
        assert b.replica.acks == [] and c.replica.acks == []

    def test_mutation_applied_names_origin(self):
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        b = Replica("bob")
        hub.join(b.channel, "bob", a.workspace_id)
        a.submit("CreateNote", text="z", x=0.0, y=0.0)
        applied = [m for m in b.channel.messages if m["type"] == "mutationApplied"]
        assert len(applied) == 1
        assert applied[0]["originSession"] == a.session.id
        assert applied[0]["clientSeq"] == 1
        assert applied[0]["actor"] == "alice"

    def test_ai_result_delivery_count(self):
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        b = ScriptedClient(hub, "bob", a.workspace_id)
        n = hub.broadcast_ai_result(a.workspace_id, "decomposeGoal", {"cards": []}, base_revision=0)
        assert n == 2
        for client in (a, b):
            assert client.replica.ai_results[0]["kind"] == "decomposeGoal"
            assert client.replica.ai_results[0]["baseRevision"] == 0

    def test_ai_result_with_no_sessions_is_a_noop(self):
        hub = make_hub()
        wid = hub.ensure_workspace("ws_empty")
        assert hub.broadcast_ai_result(wid, "regroup", {}, base_revision=0) == 0

    def test_left_session_stops_receiving(self):
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        b = ScriptedClient(hub, "bob", a.workspace_id)
        hub.leave(b.session)
        a.submit("CreateNote", text="after", x=0.0, y=0.0)
        assert len(b.replica.state.notes) == 0
        assert hub.sessions_of(a.workspace_id) == [a.session]


# --- heartbeat sweep ---


class TestSweep:
    def test_sweep_drops_silent_sessions(self):
        clock = SimulatedClock()
        hub = make_hub(clock=clock)
        a = ScriptedClient(hub, "alice")
        b = ScriptedClient(hub, "bob", a.workspace_id)
        clock.advance(HEARTBEAT_TIMEOUT_MS - 1)
        hub.touch(b.session)
        clock.advance(2)
        dropped = hub.sweep()
        assert [s.user for s in dropped] == ["alice"]
        assert hub.sessions_of(a.workspace_id) == [b.session]

    def test_touch_keeps_a_session_alive(self):
        clock = SimulatedClock()
        hub = make_hub(clock=clock)
        a = ScriptedClient(hub, "alice")
        for _ in range(5):
            clock.advance(HEARTBEAT_TIMEOUT_MS // 2)
            hub.touch(a.session)
        assert hub.sweep() == []


# --- restore ---


class TestRestore:
    def test_restore_bumps_revision_and_resnapshots(self):
        """Loading older content still moves the revision forward."""
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        a.submit("CreateNote", text="one", x=0.0, y=0.0)
        a.submit("CreateNote", text="two", x=0.0, y=0.0)
        frozen = hub.get_state(a.workspace_id)
        a.submit("CreateNote", text="three", x=0.0, y=0.0)
        assert hub.get_state(a.workspace_id).revision == 3
        rev = hub.restore_state(a.workspace_id, frozen)
        assert rev == 4
        assert a.replica.seen_revisions[-1] == 4
        assert len(a.replica.state.notes) == 2
        assert a.replica.state.revision == 4

    def test_restore_clears_active_recording(self):
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        a.submit("SetRecording", recordingId="rec_1")
        recording = hub.get_state(a.workspace_id)
        assert recording.active_recording == "rec_1"
        hub.restore_state(a.workspace_id, recording)
        assert hub.get_state(a.workspace_id).active_recording is None


# --- convergence ---


class TestConvergence:
    def test_three_clients_converge_single_threaded(self):
        """Deterministic interleaving: replicas equal the server bit for bit."""
        for seed in range(3):
            hub, clients = run_convergence_session(seed, threaded=False)
            server = serialize_state(hub.get_state(clients[0].workspace_id))
            for c in clients:
                assert c.replica.violations == []
                assert c.replica.serialized() == server

    def test_three_clients_converge_threaded(self):
        """Concurrent submitters: the lock induces one total order for all."""
        hub, clients = run_convergence_session(99, threaded=True)
        server = serialize_state(hub.get_state(clients[0].workspace_id))
        for c in clients:
            assert c.replica.violations == []
            assert c.replica.serialized() == server

    def test_revisions_are_gapless_per_replica(self):
        hub, clients = run_convergence_session(5, threaded=True)
        for c in clients:
            revs = c.replica.seen_revisions
            assert revs[0] == 0
            assert revs == list(range(revs[0], revs[-1] + 1))

    def test_late_joiner_converges_during_traffic(self):
        """A client joining mid-storm still ends bit-identical."""
        hub = make_hub()
        wid = hub.ensure_workspace("ws_late")
        early = ScriptedClient(hub, "early", wid)
        stop = threading.Event()

        def chatter():
            rng = random.Random(42)
            while not stop.is_set():
                early.submit("CreateNote", text=f"n{rng.randrange(999)}", x=0.0, y=0.0)
                time.sleep(0.001)

        t = threading.Thread(target=chatter)
        t.start()
        time.sleep(0.02)
        late = ScriptedClient(hub, "late", wid)
        time.sleep(0.02)
        stop.set()
        t.join()
        server = serialize_state(hub.get_state(wid))
        assert late.replica.violations == []
        assert late.replica.serialized() == server
        assert early.replica.serialized() == server

    def test_concurrent_edit_last_write_wins(self):
        """Whole-text edits resolve to whichever the server ordered last."""
        hub = make_hub()
        a = ScriptedClient(hub, "alice")
        b = ScriptedClient(hub, "bob", a.workspace_id)
        a.submit("CreateNote", text="draft", x=0.0, y=0.0)
        note_id = next(iter(a.replica.state.notes))
        a.submit("EditNoteText", noteId=note_id, text="alice version")
        b.submit("EditNoteText", noteId=note_id, text="bob version")
        server = hub.get_state(a.workspace_id)
        assert server.notes[note_id].text == "bob version"
        assert a.replica.state.notes[note_id].text == "bob version"
        assert b.replica.state.notes[note_id].text == "bob version"


# --- channels ---


class TestLoopbackChannel:
    def test_records_messages_in_order(self):
        ch = LoopbackChannel("t")
        ch.send({"type": "a"})
        ch.send({"type": "b"})
        assert [m["type"] for m in ch.messages] == ["a", "b"]
        assert [m["type"] for m in ch.drain()] == ["a", "b"]
        assert ch.messages == []
