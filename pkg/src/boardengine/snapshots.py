"""Named save/load of whole workspace states, backed by JSON files on disk.

Layout under the storage root: one directory per workspace holding an
``index.json`` plus one ``<sanitized-name>.snapshot.json`` per snapshot.
The index is the source of truth for which snapshots exist and keeps the
user-facing name exactly as given; the sanitized form only names the file.
Listing reads payloads to validate them, so a damaged file shows up as a
``corrupt`` entry instead of silently disappearing.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from pathlib import Path
from typing import Optional

from .errors import (
    CorruptSnapshot,
    InvariantViolation,
    NameExists,
    StorageFailure,
    UnknownSnapshot,
)
from .serialize import deserialize_state, serialize_state

log = logging.getLogger(__name__)

INDEX_FILE = "index.json"
SNAPSHOT_SUFFIX = ".snapshot.json"

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def sanitize_name(name: str) -> str:
    """Reduce a user-facing name to a filesystem-safe stem."""
    safe = _UNSAFE.sub("-", name.strip()).strip("-.")
    return safe


class FileSnapshotBackend:
    """Stores index and payload files under ``root/<workspace>/``."""

    def __init__(self, root: str | Path):
        self._root = Path(root)

    def _workspace_dir(self, workspace_id: str) -> Path:
        stem = sanitize_name(workspace_id) or "workspace"
        return self._root / stem

    def read_index(self, workspace_id: str) -> Optional[dict]:
        path = self._workspace_dir(workspace_id) / INDEX_FILE
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        except OSError as exc:
            raise StorageFailure(f"cannot read snapshot index: {exc}") from exc
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise StorageFailure(f"snapshot index is not valid JSON: {exc}") from exc

    def write_index(self, workspace_id: str, index: dict) -> None:
        directory = self._workspace_dir(workspace_id)
        path = directory / INDEX_FILE
        tmp = directory / (INDEX_FILE + ".tmp")
        try:
            directory.mkdir(parents=True, exist_ok=True)
            tmp.write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageFailure(f"cannot write snapshot index: {exc}") from exc

    def read_payload(self, workspace_id: str, file_name: str) -> str:
        path = self._workspace_dir(workspace_id) / file_name
        try:
            return path.read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise CorruptSnapshot(f"snapshot payload file is missing: {file_name}") from exc
        except OSError as exc:
            raise StorageFailure(f"cannot read snapshot payload: {exc}") from exc

    def write_payload(self, workspace_id: str, file_name: str, text: str) -> None:
        directory = self._workspace_dir(workspace_id)
        path = directory / file_name
        tmp = directory / (file_name + ".tmp")
        try:
            directory.mkdir(parents=True, exist_ok=True)
            tmp.write_text(text, encoding="utf-8")
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageFailure(f"cannot write snapshot payload: {exc}") from exc


class SnapshotStore:
    """Save, list, and load named snapshots of live workspaces."""

    def __init__(self, hub, backend, clock=None):
        self._hub = hub
        self._backend = backend
        self._clock = clock if clock is not None else hub.clock
        self._lock = threading.Lock()

    # --- index bookkeeping ---

    def _load_index(self, workspace_id: str) -> dict:
        index = self._backend.read_index(workspace_id)
        if index is None:
            return {"formatVersion": 1, "snapshots": []}
        return index

    def _entry_named(self, index: dict, name: str) -> Optional[dict]:
        for entry in index["snapshots"]:
            if entry["name"] == name:
                return entry
        return None

    def _unique_file_name(self, index: dict, stem: str) -> str:
        taken = {entry["file"] for entry in index["snapshots"]}
        candidate = stem + SNAPSHOT_SUFFIX
        counter = 2
        while candidate in taken:
            candidate = f"{stem}-{counter}{SNAPSHOT_SUFFIX}"
            counter += 1
        return candidate

    # --- operations ---

    def save(self, workspace_id: str, name: str, overwrite: bool = False) -> dict:
        """Persist the workspace's current state under a user-chosen name."""
        stem = sanitize_name(name)
        if not stem:
            raise InvariantViolation("snapshot name is empty after sanitization")
        state = self._hub.get_state(workspace_id)
        payload = serialize_state(state)
        with self._lock:
            index = self._load_index(workspace_id)
            entry = self._entry_named(index, name)
            if entry is not None and not overwrite:
                raise NameExists(f"snapshot {name!r} already exists")
            if entry is None:
                entry = {"name": name, "file": self._unique_file_name(index, stem)}
                index["snapshots"].append(entry)
            entry["savedAt"] = self._clock.now_ms()
            entry["revision"] = state.revision
            entry["seq"] = max((e.get("seq", 0) for e in index["snapshots"]), default=0) + 1
            self._backend.write_payload(workspace_id, entry["file"], payload)
            self._backend.write_index(workspace_id, index)
        return {"name": entry["name"], "savedAt": entry["savedAt"], "revision": entry["revision"]}

    def list(self, workspace_id: str) -> list[dict]:
        """All snapshots, newest first; unreadable ones flagged, not hidden."""
        index = self._load_index(workspace_id)
        entries = sorted(
            index["snapshots"],
            key=lambda e: (e.get("savedAt", 0), e.get("seq", 0)),
            reverse=True,
        )
        listed = []
        for entry in entries:
            row = {
                "name": entry["name"],
                "savedAt": entry.get("savedAt", 0),
                "revision": entry.get("revision", 0),
            }
            try:
                deserialize_state(self._backend.read_payload(workspace_id, entry["file"]))
            except (CorruptSnapshot, StorageFailure) as exc:
                log.warning("snapshot %r of %s is unreadable: %s", entry["name"], workspace_id, exc)
                row["corrupt"] = True
            listed.append(row)
        return listed

    def load(self, workspace_id: str, name: str) -> int:
        """Replace live workspace content with a saved snapshot's.

        The revision counter keeps counting up (rollback of content, never of
        history), any active recording is force-stopped, and every connected
        session receives a fresh join snapshot. Returns the new revision.
        """
        with self._lock:
            index = self._load_index(workspace_id)
            entry = self._entry_named(index, name)
            if entry is None:
                raise UnknownSnapshot(f"no snapshot named {name!r}")
            payload = self._backend.read_payload(workspace_id, entry["file"])
        content = deserialize_state(payload)
        return self._hub.restore_state(workspace_id, content)
