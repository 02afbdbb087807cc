"""Model providers: the live HTTP backend and the deterministic mock.

The mock is the workhorse for tests and replay: it matches fixture entries
against the canonicalized template variables (sorted keys, trimmed values),
so identical requests always see identical responses. Entries may script a
"sequence" of responses to exercise the retry path; the last element repeats
once the sequence is exhausted, which keeps end states deterministic.
"""

from __future__ import annotations

import base64
import binascii
import json
import os
from pathlib import Path
from typing import Mapping, Optional, Protocol

from ..errors import BadConfig, ProviderTimeout, ProviderUnavailable

ASR_FIXTURE_PREFIX = "fixture:"


class Provider(Protocol):
    def complete(self, prompt: str, *, context: Optional[dict] = None, timeout_s: float = 30.0) -> str:
        ...

    def transcribe(self, audio_b64: str, *, timeout_s: float = 30.0) -> str:
        ...


def canonicalize_variables(variables: Mapping[str, str]) -> tuple:
    """Stable fixture key: sorted keys, whitespace-trimmed values."""
    return tuple((k, str(variables[k]).strip()) for k in sorted(variables))


# --- mock -------------------------------------------------------------------

class MockProvider:
    """Fixture-driven provider for tests, demos, and replay.

    Fixture layout: one ``<templateId>.json`` per template in the fixture
    directory, each shaped as::

        {
          "entries": [
            {"when": {"goal": {"equals": "..."}}, "response": {...}},
            {"when": {"notes": {"contains": "Airbnb"}}, "sequence": ["garbage", {...}]}
          ],
          "default": {...}
        }

    An entry matches when every ``when`` clause matches the trimmed variable
    value. ``response`` may be an object (serialized to JSON text) or a raw
    string (returned as-is, useful for malformed-output tests). ``sequence``
    yields its elements across successive identical calls. ``asr.json`` maps
    fixture tags to transcription text for audio chunks of the form
    ``base64("fixture:<tag>")``.
    """

    def __init__(self, fixtures_dir: str | Path):
        self._dir = Path(fixtures_dir)
        if not self._dir.is_dir():
            raise BadConfig(f"mock fixtures directory not found: {self._dir}")
        self._files: dict[str, dict] = {}
        self._cursors: dict[tuple, int] = {}
        self._asr: Optional[dict] = None

    def _fixture(self, template_id: str) -> dict:
        if template_id not in self._files:
            path = self._dir / f"{template_id}.json"
            if not path.is_file():
                self._files[template_id] = {}
            else:
                try:
                    self._files[template_id] = json.loads(path.read_text(encoding="utf-8"))
                except (OSError, json.JSONDecodeError) as exc:
                    raise BadConfig(f"unreadable fixture file {path}: {exc}") from exc
        return self._files[template_id]

    @staticmethod
    def _matches(when: dict, variables: dict) -> bool:
        for var, clause in when.items():
            value = str(variables.get(var, "")).strip()
            if "equals" in clause and value != str(clause["equals"]).strip():
                return False
            if "contains" in clause and str(clause["contains"]) not in value:
                return False
        return True

    @staticmethod
    def _render(response) -> str:
        if isinstance(response, str):
            return response
        return json.dumps(response, ensure_ascii=False)

    def complete(self, prompt: str, *, context: Optional[dict] = None, timeout_s: float = 30.0) -> str:
        if not context or "templateId" not in context:
            raise ProviderUnavailable("mock provider requires template context")
        template_id = context["templateId"]
        variables = dict(context.get("variables", {}))
        fixture = self._fixture(template_id)
        key_vars = canonicalize_variables(variables)
        for i, entry in enumerate(fixture.get("entries", [])):
            if not self._matches(entry.get("when", {}), variables):
                continue
            if "sequence" in entry:
                seq = entry["sequence"]
                cursor_key = (template_id, i, key_vars)
                cursor = self._cursors.get(cursor_key, 0)
                self._cursors[cursor_key] = cursor + 1
                return self._render(seq[min(cursor, len(seq) - 1)])
            return self._render(entry.get("response"))
        if "default" in fixture:
            return self._render(fixture["default"])
        raise ProviderUnavailable(
            f"no fixture entry matches template {template_id!r} with variables {dict(key_vars)!r}"
        )

    def transcribe(self, audio_b64: str, *, timeout_s: float = 30.0) -> str:
        if not audio_b64:
            return ""
        try:
            decoded = base64.b64decode(audio_b64, validate=True).decode("utf-8", errors="replace")
        except (binascii.Error, ValueError):
            return ""
        if not decoded.startswith(ASR_FIXTURE_PREFIX):
            return ""
        tag = decoded[len(ASR_FIXTURE_PREFIX):]
        if self._asr is None:
            path = self._dir / "asr.json"
            if path.is_file():
                try:
                    self._asr = json.loads(path.read_text(encoding="utf-8"))
                except (OSError, json.JSONDecodeError) as exc:
                    raise BadConfig(f"unreadable fixture file {path}: {exc}") from exc
            else:
                self._asr = {}
        return str(self._asr.get(tag, ""))


# --- live -------------------------------------------------------------------

ENDPOINT_ENV = "BOARD_AI_ENDPOINT"
MODEL_ENV = "BOARD_AI_MODEL"
API_KEY_ENV = "BOARD_AI_API_KEY"
ASR_MODEL_ENV = "BOARD_AI_ASR_MODEL"


class LiveHttpProvider:
    """Chat-completions-style HTTP backend configured from the environment."""

    def __init__(
        self,
        endpoint: Optional[str] = None,
        model: Optional[str] = None,
        api_key: Optional[str] = None,
        asr_model: Optional[str] = None,
    ):
        self._endpoint = (endpoint or os.environ.get(ENDPOINT_ENV, "")).rstrip("/")
        self._model = model or os.environ.get(MODEL_ENV, "")
        self._api_key = api_key or os.environ.get(API_KEY_ENV, "")
        self._asr_model = asr_model or os.environ.get(ASR_MODEL_ENV, "whisper-1")
        if not self._endpoint or not self._model:
            raise BadConfig(
                f"live provider needs {ENDPOINT_ENV} and {MODEL_ENV} set (or --mock-fixtures)"
            )

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def complete(self, prompt: str, *, context: Optional[dict] = None, timeout_s: float = 30.0) -> str:
        import httpx

        body = {
            "model": self._model,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            response = httpx.post(
                f"{self._endpoint}/chat/completions",
                json=body,
                headers=self._headers(),
                timeout=timeout_s,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"completion timed out after {timeout_s}s") from exc
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"completion request failed: {exc}") from exc
        if response.status_code != 200:
            raise ProviderUnavailable(f"provider returned HTTP {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(f"unexpected completion response shape: {exc}") from exc

    def transcribe(self, audio_b64: str, *, timeout_s: float = 30.0) -> str:
        import httpx

        if not audio_b64:
            return ""
        try:
            audio = base64.b64decode(audio_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ProviderUnavailable(f"audio chunk is not valid base64: {exc}") from exc
        try:
            response = httpx.post(
                f"{self._endpoint}/audio/transcriptions",
                data={"model": self._asr_model},
                files={"file": ("chunk.wav", audio, "audio/wav")},
                headers={"Authorization": f"Bearer {self._api_key}"} if self._api_key else {},
                timeout=timeout_s,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"transcription timed out after {timeout_s}s") from exc
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"transcription request failed: {exc}") from exc
        if response.status_code != 200:
            raise ProviderUnavailable(f"provider returned HTTP {response.status_code}")
        try:
            return response.json()["text"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(f"unexpected transcription response shape: {exc}") from exc
