"""The gateway front: render, call, parse, retry.

Every AI feature goes through ``Gateway.complete_structured``; nothing else
in the system talks to a provider. Parse or validation failures re-ask the
provider with a repair note appended, up to max_retries extra attempts.
Provider-level failures (timeout, unreachable) are not retried; they bubble
up for the caller to surface.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Any, Mapping, Optional

from ..errors import MalformedOutput
from .providers import Provider
from .schemas import parse_structured
from .templates import render_prompt

DEFAULT_MAX_RETRIES = 2
DEFAULT_TIMEOUT_S = 30.0
DEFAULT_WORKSPACE_CAP = 4

_REPAIR_NOTE = (
    "\n\nYour previous reply could not be used: {error}. "
    "Respond again with only the JSON document in the exact required format."
)


@dataclass(frozen=True)
class StructuredResult:
    value: Any
    raw_text: str
    attempts: int


class _FifoGate:
    """At most `limit` concurrent holders; waiters admitted in arrival order."""

    def __init__(self, limit: int):
        self._limit = limit
        self._lock = threading.Lock()
        self._active = 0
        self._waiters: deque[threading.Event] = deque()

    def acquire(self) -> None:
        with self._lock:
            if self._active < self._limit and not self._waiters:
                self._active += 1
                return
            ticket = threading.Event()
            self._waiters.append(ticket)
        ticket.wait()

    def release(self) -> None:
        with self._lock:
            if self._waiters:
                self._waiters.popleft().set()  # slot transfers to the next in line
            else:
                self._active -= 1


class Gateway:
    def __init__(
        self,
        provider: Provider,
        max_retries: int = DEFAULT_MAX_RETRIES,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        workspace_cap: int = DEFAULT_WORKSPACE_CAP,
    ):
        self._provider = provider
        self._max_retries = max_retries
        self._timeout_s = timeout_s
        self._workspace_cap = workspace_cap
        self._gates: dict[str, _FifoGate] = {}
        self._gates_lock = threading.Lock()

    @property
    def provider(self) -> Provider:
        return self._provider

    def _gate(self, workspace_id: str) -> _FifoGate:
        with self._gates_lock:
            gate = self._gates.get(workspace_id)
            if gate is None:
                gate = _FifoGate(self._workspace_cap)
                self._gates[workspace_id] = gate
            return gate

    def complete_structured(
        self,
        template_id: str,
        variables: Mapping[str, str],
        workspace_id: Optional[str] = None,
    ) -> StructuredResult:
        prompt = render_prompt(template_id, variables)
        context = {"templateId": template_id, "variables": dict(variables)}
        gate = self._gate(workspace_id) if workspace_id is not None else None
        if gate is not None:
            gate.acquire()
        try:
            ask = prompt
            last_error: Optional[MalformedOutput] = None
            attempts = 0
            for _ in range(self._max_retries + 1):
                attempts += 1
                raw = self._provider.complete(ask, context=context, timeout_s=self._timeout_s)
                try:
                    value = parse_structured(template_id, raw)
                    return StructuredResult(value=value, raw_text=raw, attempts=attempts)
                except MalformedOutput as exc:
                    last_error = exc
                    ask = prompt + _REPAIR_NOTE.format(error=exc.detail or str(exc))
            raise MalformedOutput(
                f"provider output for {template_id} invalid after {attempts} attempts: {last_error}"
            )
        finally:
            if gate is not None:
                gate.release()

    def transcribe(self, audio_b64: str) -> str:
        return self._provider.transcribe(audio_b64, timeout_s=self._timeout_s)
