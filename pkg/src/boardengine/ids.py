"""Server-assigned identifiers.

Tokens are ULID-style: a 48-bit millisecond timestamp followed by 80 bits
of randomness, Crockford base32 encoded, with a per-namespace prefix so a
note id can never be mistaken for a group id. Within one factory the
tokens are strictly monotone even when the clock stands still (the random
tail is incremented), which makes creation order recoverable by sorting
and guarantees ids are never reused.
"""

from __future__ import annotations

import random
import threading

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"

_TIME_BITS = 48
_RAND_BITS = 80


def _encode(value: int, chars: int) -> str:
    out = []
    for _ in range(chars):
        out.append(_CROCKFORD[value & 0x1F])
        value >>= 5
    return "".join(reversed(out))


class IdFactory:
    """Monotone ULID-style token generator, one namespace prefix per call.

    Pass a seeded ``random.Random`` plus a simulated clock to get fully
    deterministic ids (replay mode); defaults are wall clock and a fresh
    SystemRandom.
    """

    def __init__(self, clock, rng: random.Random | None = None):
        self._clock = clock
        self._rng = rng if rng is not None else random.SystemRandom()
        self._lock = threading.Lock()
        self._last_ts = -1
        self._last_rand = 0

    def _ulid(self) -> str:
        with self._lock:
            ts = self._clock.now_ms()
            if ts <= self._last_ts:
                # same (or rewound) millisecond: bump the tail to stay monotone
                ts = self._last_ts
                self._last_rand += 1
                if self._last_rand >= 1 << _RAND_BITS:
                    ts += 1
                    self._last_rand = self._rng.getrandbits(_RAND_BITS)
            else:
                self._last_rand = self._rng.getrandbits(_RAND_BITS)
            self._last_ts = ts
            return _encode(ts, 10) + _encode(self._last_rand, 16)

    def workspace_id(self) -> str:
        return "ws_" + self._ulid()

    def note_id(self) -> str:
        return "note_" + self._ulid()

    def group_id(self) -> str:
        return "grp_" + self._ulid()

    def lens_id(self) -> str:
        return "lens_" + self._ulid()

    def recording_id(self) -> str:
        return "rec_" + self._ulid()

    def session_id(self) -> str:
        return "sess_" + self._ulid()

    def card_id(self) -> str:
        return "card_" + self._ulid()

    def request_id(self) -> str:
        return "req_" + self._ulid()
