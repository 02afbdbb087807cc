"""Shared-board engine: authoritative workspace state, sync, and AI helpers."""

from .errors import BoardError
from .model import WorkspaceSettings, WorkspaceState, empty_state
from .mutations import Mutation, apply_mutation
from .serialize import deserialize_state, serialize_state

__version__ = "0.1.0"

__all__ = [
    "BoardError",
    "Mutation",
    "WorkspaceSettings",
    "WorkspaceState",
    "apply_mutation",
    "deserialize_state",
    "empty_state",
    "serialize_state",
    "__version__",
]
