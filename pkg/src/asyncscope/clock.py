"""Clock sources for profiling sessions.

The virtual clock makes timing assertions exact: task bodies declare
synthetic durations and the scheduler advances time explicitly, so
repeated runs produce identical traces.
"""

from __future__ import annotations

import enum
import time


class ClockMode(enum.Enum):
    REAL_MONOTONIC = "real"
    VIRTUAL = "virtual"


class RealMonotonicClock:
    """Wall clock reporting nanoseconds since its own creation."""

    mode = ClockMode.REAL_MONOTONIC

    def __init__(self) -> None:
        self.origin_ns = time.monotonic_ns()

    def now_ns(self) -> int:
        return time.monotonic_ns() - self.origin_ns


class VirtualClock:
    """Deterministic clock advanced explicitly, never by sleeping."""

    mode = ClockMode.VIRTUAL

    def __init__(self, start_ns: int = 0) -> None:
        if start_ns < 0:
            raise ValueError("start_ns must be non-negative")
        self.origin_ns = start_ns
        self._now_ns = start_ns

    def now_ns(self) -> int:
        return self._now_ns

    def advance(self, duration_ns: int) -> None:
        if duration_ns < 0:
            raise ValueError("cannot advance the clock backwards")
        self._now_ns += duration_ns

    def _advance_to(self, t_ns: int) -> None:
        # Scheduler hook; time is non-decreasing by construction.
        if t_ns < self._now_ns:
            raise ValueError("virtual time moved backwards")
        self._now_ns = t_ns


ClockSource = RealMonotonicClock | VirtualClock
