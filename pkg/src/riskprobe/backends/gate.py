"""Admission control for provider requests."""

from __future__ import annotations

import threading
import time
from collections import deque
from contextlib import contextmanager
from typing import Callable, Iterator


class GateClosed(Exception):
    """Raised to callers waiting on a gate that is shut down."""


class RateGate:
    """Caps requests per sliding window and concurrent requests in flight.

    ``None`` for a limit means unlimited. Waiting callers block; closing the
    gate wakes them with :class:`GateClosed`.
    """

    def __init__(
        self,
        requests_per_interval: int | None = None,
        interval_s: float = 60.0,
        max_in_flight: int | None = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        if requests_per_interval is not None and requests_per_interval < 1:
            raise ValueError("requests_per_interval must be >= 1")
        if max_in_flight is not None and max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if interval_s <= 0:
            raise ValueError("interval_s must be > 0")
        self.requests_per_interval = requests_per_interval
        self.interval_s = interval_s
        self.max_in_flight = max_in_flight
        self._clock = clock
        self._cond = threading.Condition()
        self._admitted: deque[float] = deque()
        self._in_flight = 0
        self._closed = False

    @property
    def in_flight(self) -> int:
        return self._in_flight

    @property
    def unlimited(self) -> bool:
        return self.requests_per_interval is None and self.max_in_flight is None

    def acquire(self) -> None:
        with self._cond:
            while True:
                if self._closed:
                    raise GateClosed("rate gate closed while waiting")
                now = self._clock()
                while self._admitted and self._admitted[0] <= now - self.interval_s:
                    self._admitted.popleft()
                wait: float | None = None
                if self.max_in_flight is not None and self._in_flight >= self.max_in_flight:
                    wait = None  # woken by release()
                elif self.requests_per_interval is not None and len(self._admitted) >= self.requests_per_interval:
                    wait = self._admitted[0] + self.interval_s - now
                else:
                    self._in_flight += 1
                    if self.requests_per_interval is not None:
                        self._admitted.append(now)
                    return
                self._cond.wait(wait)

    def release(self) -> None:
        with self._cond:
            self._in_flight -= 1
            self._cond.notify_all()

    @contextmanager
    def slot(self) -> Iterator[None]:
        self.acquire()
        try:
            yield
        finally:
            self.release()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def to_dict(self) -> dict[str, float | int | None]:
        return {
            "requests_per_interval": self.requests_per_interval,
            "interval_s": self.interval_s,
            "max_in_flight": self.max_in_flight,
        }
