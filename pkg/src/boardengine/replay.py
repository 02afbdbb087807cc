"""Headless scripted sessions against an in-process hub, for CI and demos.

A replay script is a JSON document of ordered steps from named virtual
clients, driven on a simulated clock with a seeded id factory, so a given
script plus a fixture directory produces a bit-identical final state every
run. Each step is one of::

    {"action": "join",    "client": "amy", "user": "Amy"}
    {"action": "send",    "client": "amy", "message": {<wire message>}}
    {"action": "bind",    "client": "amy", "name": "firstCard",
     "from": "aiResult", "where": {"kind": "decomposeGoal"},
     "path": "payload.cards[0].cardId"}
    {"action": "advance", "ms": 10000}
    {"action": "leave",   "client": "amy"}

Messages pass through the same validation and dispatch path as a live
connection. "advance" moves the simulated clock and gives the hint
schedulers one tick, so scripts advance in whole hint intervals when they
want one generation per step. Clients mirror workspace state exactly the way
a real replica would; the report records any divergence as a violation
instead of raising mid-script.

Server-assigned identifiers (note, group, card, lens ids) are unknown when a
script is written, so "bind" captures them as they stream back: it scans the
named client's received messages of one source kind ("aiResult", "ack",
"error", "segment", or "mutation" for applied mutations), takes the most
recent one whose fields match every dotted-path "where" clause, and stores
the value at "path" under "name". Later "send" messages may then use the
string "$firstCard" anywhere a value is expected; only whole strings shaped
like an identifier reference ("$" followed by a name) are substituted, so
ordinary text such as "$2000" passes through untouched.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import BadConfig
from .gateway import MockProvider
from .model import WorkspaceState
from .mutations import Mutation, apply_mutation
from .protocol import parse_client_message
from .runtime import BoardRuntime, build_runtime
from .serialize import canonical_json, doc_to_state, serialize_state, state_digest, state_to_doc
from .sync import LoopbackChannel

SCRIPT_FORMAT_VERSION = 1


class _ReplayClient:
    """A scripted participant mirroring state from its own wire traffic."""

    def __init__(self, name: str):
        self.name = name
        self.channel = LoopbackChannel(name=name, on_message=self._receive)
        self.state: Optional[WorkspaceState] = None
        self.session = None
        self.acks: list[dict] = []
        self.errors: list[dict] = []
        self.ai_results: list[dict] = []
        self.segments: list[dict] = []
        self.mutations: list[dict] = []
        self.violations: list[str] = []

    def _receive(self, msg: dict) -> None:
        mtype = msg.get("type")
        if mtype == "joinSnapshot":
            self.state = doc_to_state(msg["state"])
        elif mtype == "mutationApplied":
            if self.state is None:
                self.violations.append("mutation before snapshot")
                return
            expected = self.state.revision + 1
            if msg["serverRevision"] != expected:
                self.violations.append(
                    f"revision gap: expected {expected}, got {msg['serverRevision']}"
                )
                return
            try:
                self.state, _ = apply_mutation(self.state, Mutation.from_wire(msg["mutation"]))
            except Exception as exc:  # noqa: BLE001 - recorded for the report
                self.violations.append(f"apply failed at revision {msg['serverRevision']}: {exc}")
            else:
                self.mutations.append(msg)
        elif mtype == "ack":
            self.acks.append(msg)
        elif mtype == "error":
            self.errors.append(msg)
        elif mtype == "aiResult":
            self.ai_results.append(msg)
        elif mtype == "transcriptSegment":
            self.segments.append(msg)


@dataclass
class ReplayReport:
    workspace_id: str
    revision: int
    final_state: str
    digest: str
    clients: dict[str, _ReplayClient] = field(default_factory=dict)

    def violations(self) -> dict[str, list[str]]:
        return {name: list(c.violations) for name, c in self.clients.items() if c.violations}

    def to_doc(self) -> dict:
        return {
            "digest": self.digest,
            "workspace": self.workspace_id,
            "revision": self.revision,
            "finalState": json.loads(self.final_state),
            "clients": {
                name: {
                    "aiResults": client.ai_results,
                    "errors": client.errors,
                    "violations": client.violations,
                }
                for name, client in sorted(self.clients.items())
            },
        }

    def render(self) -> str:
        return canonical_json(self.to_doc())


# A whole-string value like "$firstCard" is a reference to a bound name;
# anything else (including "$2000" or "a $word inside") is literal text.
_REFERENCE = re.compile(r"^\$([A-Za-z_][A-Za-z0-9_]*)$")

_PATH_PART = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)((?:\[\d+\])*)$")

_MISSING = object()

_BIND_SOURCES = ("aiResult", "ack", "error", "segment", "mutation")


def _messages_of(client: _ReplayClient, source: str) -> list[dict]:
    return {
        "aiResult": client.ai_results,
        "ack": client.acks,
        "error": client.errors,
        "segment": client.segments,
        "mutation": client.mutations,
    }[source]


def _follow_path(doc: Any, path: str) -> Any:
    """Resolve a dotted path like "payload.cards[0].cardId"; _MISSING if absent."""
    current = doc
    for part in path.split("."):
        match = _PATH_PART.match(part)
        if match is None:
            raise BadConfig(f"malformed path segment {part!r} in {path!r}")
        key, indexes = match.group(1), match.group(2)
        if not isinstance(current, dict) or key not in current:
            return _MISSING
        current = current[key]
        for idx in re.findall(r"\[(\d+)\]", indexes):
            i = int(idx)
            if not isinstance(current, list) or i >= len(current):
                return _MISSING
            current = current[i]
    return current


def _bind(step: dict, position: int, clients: dict, bindings: dict) -> None:
    client = clients.get(_client_name(step, position))
    if client is None:
        raise BadConfig(f"step {position}: client {step.get('client')!r} has not joined")
    name = step.get("name")
    if not isinstance(name, str) or not _REFERENCE.match(f"${name}"):
        raise BadConfig(f"step {position}: bind needs an identifier-shaped 'name'")
    source = step.get("from")
    if source not in _BIND_SOURCES:
        raise BadConfig(f"step {position}: bind 'from' must be one of {', '.join(_BIND_SOURCES)}")
    where = step.get("where", {})
    if not isinstance(where, dict):
        raise BadConfig(f"step {position}: bind 'where' must be an object")
    path = step.get("path")
    if not isinstance(path, str) or not path:
        raise BadConfig(f"step {position}: bind needs a non-empty 'path'")
    chosen = None
    for msg in _messages_of(client, source):
        if all(_follow_path(msg, key) == expected for key, expected in where.items()):
            chosen = msg  # keep scanning: the most recent match wins
    if chosen is None:
        raise BadConfig(f"step {position}: no {source} message matches {where!r}")
    value = _follow_path(chosen, path)
    if value is _MISSING:
        raise BadConfig(f"step {position}: path {path!r} not present in the matched {source}")
    if isinstance(value, (dict, list)):
        raise BadConfig(f"step {position}: path {path!r} must name a scalar, not a container")
    bindings[name] = value


def _substitute(value: Any, bindings: dict, position: int) -> Any:
    if isinstance(value, str):
        match = _REFERENCE.match(value)
        if match is None:
            return value
        name = match.group(1)
        if name not in bindings:
            raise BadConfig(f"step {position}: undefined reference ${name}")
        return bindings[name]
    if isinstance(value, list):
        return [_substitute(v, bindings, position) for v in value]
    if isinstance(value, dict):
        return {k: _substitute(v, bindings, position) for k, v in value.items()}
    return value


def load_script(path: str | Path) -> dict:
    try:
        script = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise BadConfig(f"cannot read replay script: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadConfig(f"replay script is not valid JSON: {exc}") from exc
    return script


def run_replay(
    script: dict,
    fixtures_dir: str | Path,
    runtime: Optional[BoardRuntime] = None,
    hint_interval_ms: Optional[int] = None,
) -> ReplayReport:
    """Execute one script against mock fixtures and report the outcome."""
    if not isinstance(script, dict):
        raise BadConfig("replay script must be a JSON object")
    version = script.get("formatVersion", SCRIPT_FORMAT_VERSION)
    if version != SCRIPT_FORMAT_VERSION:
        raise BadConfig(f"unsupported replay script formatVersion: {version!r}")
    steps = script.get("steps")
    if not isinstance(steps, list):
        raise BadConfig("replay script needs a 'steps' array")

    if runtime is None:
        from .clock import SimulatedClock

        if hint_interval_ms is None:
            hint_interval_ms = script.get("hintIntervalMs")
        runtime = build_runtime(
            MockProvider(fixtures_dir),
            clock=SimulatedClock(),
            seed=int(script.get("seed", 0)),
            hint_interval_ms=hint_interval_ms,
        )
    workspace_id = runtime.hub.ensure_workspace(script.get("workspace"))
    clients: dict[str, _ReplayClient] = {}
    bindings: dict[str, Any] = {}

    for position, step in enumerate(steps):
        if not isinstance(step, dict) or "action" not in step:
            raise BadConfig(f"step {position} is not an object with an 'action'")
        action = step["action"]
        if action == "join":
            name = _client_name(step, position)
            if name in clients:
                raise BadConfig(f"step {position}: client {name!r} already joined")
            client = _ReplayClient(name)
            client.session = runtime.hub.join(
                client.channel, str(step.get("user", name)), step.get("workspace", workspace_id)
            )
            clients[name] = client
        elif action == "send":
            client = _joined_client(clients, step, position)
            message = _substitute(step.get("message"), bindings, position)
            msg = parse_client_message(message)
            runtime.dispatcher.handle(client.session, msg)
        elif action == "bind":
            _bind(step, position, clients, bindings)
        elif action == "advance":
            ms = step.get("ms")
            if not isinstance(ms, int) or ms <= 0:
                raise BadConfig(f"step {position}: advance needs a positive integer 'ms'")
            runtime.clock.advance(ms)
        elif action == "leave":
            client = _joined_client(clients, step, position)
            runtime.hub.leave(client.session)
            client.session = None
        else:
            raise BadConfig(f"step {position}: unknown action {action!r}")
        runtime.tick_schedulers()

    state = runtime.hub.get_state(workspace_id)
    report = ReplayReport(
        workspace_id=workspace_id,
        revision=state.revision,
        final_state=serialize_state(state),
        digest=state_digest(state),
        clients=clients,
    )
    _check_convergence(report, state)
    return report


def _client_name(step: dict, position: int) -> str:
    name = step.get("client")
    if not isinstance(name, str) or not name:
        raise BadConfig(f"step {position} needs a non-empty 'client'")
    return name


def _joined_client(clients: dict, step: dict, position: int) -> _ReplayClient:
    name = _client_name(step, position)
    client = clients.get(name)
    if client is None or client.session is None:
        raise BadConfig(f"step {position}: client {name!r} has not joined")
    return client


def _check_convergence(report: ReplayReport, server_state: WorkspaceState) -> None:
    server_doc = canonical_json(state_to_doc(server_state))
    for client in report.clients.values():
        if client.session is None or client.state is None:
            continue  # left early or never joined the script workspace
        if client.state.id != server_state.id:
            continue
        if canonical_json(state_to_doc(client.state)) != server_doc:
            client.violations.append("final replica state differs from the server's")
