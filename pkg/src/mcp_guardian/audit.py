"""Append-only JSONL audit trail with trace correlation and an optional
best-effort remote sink.

One record per intercepted request. Records carry digests of parameters
rather than raw values so secrets never land in the log. The local file
is the source of truth; remote shipping must never block or fail the
request path.
"""

from __future__ import annotations

import hashlib
import json
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Optional

import requests

DEFAULT_LOG_FILE = "mcp_guardian.log"
DEFAULT_QUEUE_SIZE = 1024
SHIP_MAX_RETRIES = 3
DETAIL_LIMIT = 256


class SinkIoError(Exception):
    """Local audit sink failed; the gateway fails the request closed."""


def new_trace_id(rng=None) -> str:
    """128-bit random hex id correlating request, checks, and response."""
    if rng is None:
        import secrets

        return secrets.token_hex(16)
    return "".join(rng.choice("0123456789abcdef") for _ in range(32))


def params_digest(params: Any) -> str:
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class AuditRecord:
    ts: int
    trace_id: str
    session_id: str
    token_id: str = "-"
    method: str = "-"
    tool_name: str = "-"
    verdict: str = "error"
    rule_id: str = "-"
    params_digest: str = "-"
    response_digest: str = "-"
    downstream_ms: int = -1
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "ts": self.ts,
            "trace_id": self.trace_id,
            "session_id": self.session_id,
            "token_id": self.token_id,
            "method": self.method,
            "tool_name": self.tool_name,
            "verdict": self.verdict,
            "rule_id": self.rule_id,
            "params_digest": self.params_digest,
            "response_digest": self.response_digest,
            "downstream_ms": self.downstream_ms,
            "detail": self.detail[:DETAIL_LIMIT],
        }


class AuditLog:
    """Serialized JSONL appends to a local file.

    ``record`` flushes before returning so a blocked request's record is
    durable before the error reply goes out (write-ahead contract).
    """

    def __init__(self, path: str = DEFAULT_LOG_FILE, shipper: Optional["RemoteShipper"] = None):
        self.path = path
        self.shipper = shipper
        self._lock = threading.Lock()
        try:
            self._fh = open(path, "a", encoding="utf-8")
        except OSError as exc:
            raise SinkIoError(str(exc)) from exc

    def record(self, rec: AuditRecord) -> None:
        line = json.dumps(rec.to_dict(), separators=(",", ":"), ensure_ascii=False)
        with self._lock:
            try:
                self._fh.write(line + "\n")
                self._fh.flush()
            except (OSError, ValueError) as exc:
                raise SinkIoError(str(exc)) from exc
        if self.shipper is not None:
            self.shipper.enqueue(rec)

    def close(self) -> None:
        with self._lock:
            try:
                self._fh.close()
            except OSError:
                pass


def ship_remote(batch: list, endpoint: str, transport=None, backoff_base_s: float = 0.1) -> bool:
    """POST one batch as a JSON array; up to 3 retries with exponential
    backoff, then give up. Returns True on delivery."""
    if not batch:
        return True
    body = [r.to_dict() for r in batch]
    post = transport if transport is not None else _http_post
    for attempt in range(SHIP_MAX_RETRIES + 1):
        try:
            if post(endpoint, body):
                return True
        except Exception:
            pass
        if attempt < SHIP_MAX_RETRIES:
            time.sleep(backoff_base_s * (2 ** attempt))
    return False


def _http_post(endpoint: str, body: list) -> bool:
    resp = requests.post(endpoint, json=body, timeout=5)
    return 200 <= resp.status_code < 300


class RemoteShipper:
    """Background shipper with a bounded drop-oldest queue.

    Failures are counted in ``dropped_records`` and never surface to the
    request path.
    """

    def __init__(
        self,
        endpoint: str,
        queue_size: int = DEFAULT_QUEUE_SIZE,
        transport=None,
        backoff_base_s: float = 0.1,
    ):
        self.endpoint = endpoint
        self.dropped_records = 0
        self._queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self._transport = transport
        self._backoff_base_s = backoff_base_s
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def enqueue(self, rec: AuditRecord) -> None:
        while True:
            try:
                self._queue.put_nowait(rec)
                return
            except queue.Full:
                try:
                    self._queue.get_nowait()
                    self.dropped_records += 1
                except queue.Empty:
                    pass

    def _run(self) -> None:
        while not self._stop.is_set():
            batch = self._drain()
            if not batch:
                time.sleep(0.05)
                continue
            if not ship_remote(
                batch, self.endpoint, transport=self._transport, backoff_base_s=self._backoff_base_s
            ):
                self.dropped_records += len(batch)

    def _drain(self) -> list:
        batch = []
        while len(batch) < 100:
            try:
                batch.append(self._queue.get_nowait())
            except queue.Empty:
                break
        return batch

    def flush(self, timeout_s: float = 2.0) -> None:
        deadline = time.time() + timeout_s
        while not self._queue.empty() and time.time() < deadline:
            time.sleep(0.01)

    def close(self) -> None:
        self.flush()
        self._stop.set()
        self._thread.join(timeout=2)
