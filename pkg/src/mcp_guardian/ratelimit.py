"""Per-token sliding-window rate limiter.

A timestamp log per token, pruned on every check. Rejected requests do
not consume budget, so a flood cannot lock a token out indefinitely.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Optional, Union

DEFAULT_WINDOW_MS = 60_000
DEFAULT_MAX_REQUESTS = 5


@dataclass(frozen=True)
class Admitted:
    pass


@dataclass(frozen=True)
class Limited:
    retry_after_ms: int


Verdict = Union[Admitted, Limited]


class SlidingWindowLimiter:
    def __init__(
        self,
        max_requests: int = DEFAULT_MAX_REQUESTS,
        window_ms: int = DEFAULT_WINDOW_MS,
    ):
        self.max_requests = max_requests
        self.window_ms = window_ms
        self._windows: dict[str, deque] = {}
        self._lock = threading.Lock()

    def record_and_check(self, token_id: str, now: int) -> Verdict:
        """Admit iff fewer than max_requests admissions fall inside the
        trailing window. Check-then-append is atomic per token."""
        with self._lock:
            dq = self._windows.setdefault(token_id, deque())
            cutoff = now - self.window_ms
            while dq and dq[0] <= cutoff:
                dq.popleft()
            if len(dq) < self.max_requests:
                dq.append(now)
                return Admitted()
            return Limited(retry_after_ms=(dq[0] + self.window_ms) - now)

    def prune(self, now: int) -> None:
        """Drop out-of-window timestamps and empty token entries so
        memory stays bounded. Idempotent at fixed now."""
        with self._lock:
            cutoff = now - self.window_ms
            for token_id in list(self._windows):
                dq = self._windows[token_id]
                while dq and dq[0] <= cutoff:
                    dq.popleft()
                if not dq:
                    del self._windows[token_id]

    def timestamps(self, token_id: str) -> list:
        """Snapshot of the stored window for a token (tests/introspection)."""
        with self._lock:
            return list(self._windows.get(token_id, ()))
