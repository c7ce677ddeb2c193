"""Time sources and background-task schedulers.

Everything that measures or spends time goes through a ``Clock`` so the
same code can run against the wall clock (serve mode) or against a
virtual clock (simulation mode, where delays cost no real time and
every duration comes out exact and reproducible).
"""

from __future__ import annotations

import threading
import time
from collections import deque
from typing import Callable, Protocol


class Clock(Protocol):
    def now(self) -> float:
        """Current time in seconds. Monotone per clock instance."""
        ...

    def sleep(self, seconds: float) -> None:
        """Advance this clock by ``seconds`` (blocking on a wall clock)."""
        ...

    def fork(self) -> "Clock":
        """A clock starting at this clock's current time, advancing independently."""
        ...


class SystemClock:
    """Wall-clock time backed by ``time.monotonic``."""

    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)

    def fork(self) -> "SystemClock":
        # Wall time is shared; forking is a no-op.
        return self


SYSTEM_CLOCK = SystemClock()


class VirtualClock:
    """Deterministic clock that only moves when told to.

    ``sleep`` advances time immediately, so simulated delays are exact
    and free. Independent timelines (e.g. concurrent connections in a
    simulated load run) each get their own fork; a driver keeps them
    consistent by processing events in timestamp order.
    """

    def __init__(self, start: float = 0.0):
        self._t = float(start)

    def now(self) -> float:
        return self._t

    def sleep(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot sleep a negative duration")
        self._t += seconds

    def jump_to(self, t: float) -> None:
        """Move forward to absolute time ``t``. Going backwards is a bug."""
        if t < self._t:
            raise ValueError(f"virtual time would move backwards: {t} < {self._t}")
        self._t = t

    def fork(self) -> "VirtualClock":
        return VirtualClock(self._t)


class Scheduler(Protocol):
    """Where background work (e.g. cache revalidation) gets executed."""

    def submit(self, fn: Callable[[], None]) -> None: ...


class ThreadScheduler:
    """Runs each task on its own daemon thread. Serve-mode default."""

    def submit(self, fn: Callable[[], None]) -> None:
        threading.Thread(target=fn, daemon=True).start()


class SerialScheduler:
    """Queues tasks and runs them only when drained, in submission order.

    Single-threaded stand-in for ThreadScheduler used in simulation
    mode: the test or load driver decides exactly when background work
    completes, which makes interleavings reproducible.
    """

    def __init__(self) -> None:
        self._queue: deque[Callable[[], None]] = deque()

    def submit(self, fn: Callable[[], None]) -> None:
        self._queue.append(fn)

    @property
    def pending(self) -> int:
        return len(self._queue)

    def drain(self) -> int:
        """Run queued tasks (including ones they enqueue). Returns count run."""
        ran = 0
        while self._queue:
            self._queue.popleft()()
            ran += 1
        return ran
