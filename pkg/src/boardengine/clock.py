"""Injectable clocks.

Everything time-dependent (hint scheduler, transcripts, snapshots, id
generation) takes a clock so tests and replays run in simulated time.
"""

from __future__ import annotations

import time
from datetime import datetime, timezone


class Clock:
    """Wall-clock time source."""

    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def iso(self) -> str:
        return datetime.fromtimestamp(self.now_ms() / 1000, tz=timezone.utc).isoformat(
            timespec="milliseconds"
        )


class SystemClock(Clock):
    pass


class SimulatedClock(Clock):
    """Manually advanced clock. No sleeping, ever."""

    def __init__(self, start_ms: int = 0):
        self._now_ms = start_ms

    def now_ms(self) -> int:
        return self._now_ms

    def advance(self, delta_ms: int) -> int:
        if delta_ms < 0:
            raise ValueError("clock cannot go backwards")
        self._now_ms += delta_ms
        return self._now_ms
