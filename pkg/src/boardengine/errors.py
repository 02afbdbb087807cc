"""Error hierarchy shared across the engine.

Every error carries a stable ``code`` string that is sent over the wire
verbatim, so clients can dispatch on it without parsing prose.
"""

from __future__ import annotations


class BoardError(Exception):
    """Base class for all engine errors."""

    code = "internal"

    def __init__(self, detail: str = ""):
        self.detail = detail
        super().__init__(detail or self.code)


# --- workspace core -----------------------------------------------------

class UnknownReference(BoardError):
    code = "unknown-reference"


class InvariantViolation(BoardError):
    code = "invariant-violation"


class EmptyText(BoardError):
    code = "empty-text"


class NotASubgroup(BoardError):
    code = "not-a-subgroup"


# --- sync / protocol ----------------------------------------------------

class UnknownWorkspace(BoardError):
    code = "unknown-workspace"


class ProtocolError(BoardError):
    code = "protocol-error"


class BadSequence(BoardError):
    code = "bad-sequence"


# --- gateway ------------------------------------------------------------

class MissingPlaceholder(BoardError):
    code = "missing-placeholder"


class MalformedOutput(BoardError):
    code = "malformed-output"


class ProviderUnavailable(BoardError):
    code = "provider-unavailable"


class ProviderTimeout(BoardError):
    code = "timeout"


# --- ideation -----------------------------------------------------------

class EmptyGoal(BoardError):
    code = "empty-goal"


class EmptyQuery(BoardError):
    code = "empty-query"


class UnknownRelationType(BoardError):
    code = "unknown-relation-type"


class AlreadyExpanded(BoardError):
    code = "already-expanded"


# --- affinity -----------------------------------------------------------

class TooFewNotes(BoardError):
    code = "too-few-notes"


class DuplicateLensName(BoardError):
    code = "duplicate-lens-name"


class EmptyDimensions(BoardError):
    code = "empty-dimensions"


# --- speech -------------------------------------------------------------

class RecordingAlreadyActive(BoardError):
    code = "recording-already-active"


class NoActiveRecording(BoardError):
    code = "no-active-recording"


class EmptyTranscript(BoardError):
    code = "empty-transcript"


# --- snapshots ----------------------------------------------------------

class NameExists(BoardError):
    code = "name-exists"


class UnknownSnapshot(BoardError):
    code = "unknown-snapshot"


class CorruptSnapshot(BoardError):
    code = "corrupt-snapshot"


class StorageFailure(BoardError):
    code = "storage-failure"


# --- server shell -------------------------------------------------------

class BadConfig(BoardError):
    code = "bad-config"


class PortInUse(BoardError):
    code = "port-in-use"
