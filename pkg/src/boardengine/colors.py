"""Per-user display colors.

A fixed 12-color palette assigned in first-seen order; the 13th user wraps
around to the first color. The workspace state carries the first-seen
roster (`users`), so every replica derives identical colors.
"""

from __future__ import annotations

from typing import Sequence

PALETTE: tuple[str, ...] = (
    "#e6194b",  # red
    "#3cb44b",  # green
    "#4363d8",  # blue
    "#f58231",  # orange
    "#911eb4",  # purple
    "#42d4f4",  # cyan
    "#f032e6",  # magenta
    "#bfef45",  # lime
    "#fabed4",  # pink
    "#469990",  # teal
    "#9a6324",  # brown
    "#808000",  # olive
)


def user_color(roster: Sequence[str], user: str) -> str:
    """Color for `user` given the workspace's first-seen roster.

    Unknown users get the next slot provisionally; their color becomes
    stable once they first act (which appends them to the roster).
    """
    try:
        idx = list(roster).index(user)
    except ValueError:
        idx = len(roster)
    return PALETTE[idx % len(PALETTE)]


class ColorAssigner:
    """Standalone first-seen color registry (same palette semantics)."""

    def __init__(self):
        self._roster: list[str] = []

    def color_for_user(self, user: str) -> str:
        if user not in self._roster:
            self._roster.append(user)
        return user_color(self._roster, user)
