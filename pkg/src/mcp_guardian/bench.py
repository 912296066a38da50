"""Experiment harness: flood test, attack corpus replay, and latency
comparison between a direct client-server path and the guarded path.

The flood test runs under a scripted clock so its report is bit-identical
across runs; latency uses the wall clock because it measures physical
cost.
"""

from __future__ import annotations

import json
import statistics
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

from . import audit, auth, gateway, ratelimit, toolguard, waf, wire
from .config import GuardianConfig
from .echo_server import EchoServer

FLOOD_TOKEN = "mysecrettoken123"


class ScriptedClock:
    """Deterministic clock: starts at t0 and only moves when told to."""

    def __init__(self, t0: int = 0):
        self.now_ms = t0

    def __call__(self) -> int:
        return self.now_ms

    def advance(self, ms: int) -> None:
        self.now_ms += ms


class LoopbackDownstream:
    """In-process echo server behind the downstream interface; responses
    are delivered synchronously, which keeps harness runs deterministic."""

    def __init__(self, server: EchoServer, on_frame=None):
        self.server = server
        self.on_frame = on_frame
        self.last_response: Optional[wire.Message] = None

    def send(self, msg: wire.Message) -> None:
        resp = self.server.handle(msg)
        self.last_response = resp
        if resp is not None and self.on_frame is not None:
            self.on_frame(wire.encode_frame(resp))

    def close(self) -> None:
        pass


@dataclass
class FloodReport:
    total: int
    admitted: int
    limited: int

    def to_dict(self) -> dict:
        return {"total": self.total, "admitted": self.admitted, "limited": self.limited}


@dataclass
class LatencyReport:
    scenario: str
    n: int
    median_ms: float
    p95_ms: float
    overhead_median_ms: Optional[float] = None
    overhead_pct: Optional[float] = None
    variance_ms: Optional[float] = None
    clock_source: str = "wall"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "n": self.n,
            "median_ms": self.median_ms,
            "p95_ms": self.p95_ms,
            "overhead_median_ms": self.overhead_median_ms,
            "overhead_pct": self.overhead_pct,
            "variance_ms": self.variance_ms,
            "clock_source": self.clock_source,
        }


def nearest_rank(sorted_samples: list, pct: float) -> float:
    """Nearest-rank percentile over a sorted sample."""
    if not sorted_samples:
        raise ValueError("empty sample")
    import math

    rank = max(1, math.ceil(pct / 100.0 * len(sorted_samples)))
    return sorted_samples[rank - 1]


def _flood_engine(clock, audit_path: str, max_requests: int = 5,
                  window_seconds: int = 60) -> gateway.GatewayEngine:
    config = GuardianConfig.from_dict({
        "auth": {"valid_tokens": [FLOOD_TOKEN]},
        "rate_limit": {"max_requests": max_requests, "window_seconds": window_seconds},
        "logging": {"file": audit_path},
    })
    return gateway.build_engine(config, clock=clock, session_token=None)


def _tool_call(i: int, tool: str, arguments: dict, token: Optional[str]) -> wire.Message:
    params: dict = {"name": tool, "arguments": arguments}
    if token is not None:
        params["_meta"] = {"guardianToken": token}
    return wire.Message(
        kind=wire.MessageKind.REQUEST,
        obj={"jsonrpc": "2.0", "id": i, "method": "tools/call", "params": params},
    )


def run_flood(n: int, token: str = FLOOD_TOKEN, audit_path: str = "mcp_guardian.log",
              max_requests: int = 5, window_seconds: int = 60) -> FloodReport:
    """Issue n rapid get_forecast calls through the pipeline under a
    scripted clock advancing 1 ms per call."""
    clock = ScriptedClock()
    engine = _flood_engine(clock, audit_path, max_requests, window_seconds)
    echo = EchoServer()
    downstream = LoopbackDownstream(echo)

    admitted = limited = 0
    for i in range(n):
        msg = _tool_call(i, "get_forecast", {"city": "NYC"}, token)
        action = engine.handle_request(msg, now=clock())
        if isinstance(action, gateway.Forward):
            downstream.send(action.msg)
            engine.handle_response(downstream.last_response, now=clock())
            admitted += 1
        elif isinstance(action, gateway.Reply):
            err = action.msg.obj.get("error", {})
            if err.get("message") == gateway.MSG_RATE_LIMITED:
                limited += 1
        clock.advance(1)
    engine.audit_log.close()
    return FloodReport(total=n, admitted=admitted, limited=limited)


def load_corpus(name: str) -> list:
    text = resources.files("mcp_guardian.data").joinpath(name).read_text()
    return json.loads(text)


def run_attack_corpus(corpus: Optional[list] = None,
                      audit_path: str = "mcp_guardian.log") -> dict:
    """Replay attack payloads (and the benign corpus) through the full
    pipeline; blocked payloads must never reach the downstream server."""
    if corpus is None:
        corpus = load_corpus("attack_corpus.json")
    benign = load_corpus("benign_corpus.json")

    clock = ScriptedClock()
    config = GuardianConfig.from_dict({
        "auth": {"valid_tokens": [FLOOD_TOKEN]},
        "rate_limit": {"max_requests": 10_000},
        "logging": {"file": audit_path},
    })
    engine = gateway.build_engine(config, clock=clock)
    echo = EchoServer()
    downstream = LoopbackDownstream(echo)

    def issue(i: int, arguments: dict) -> str:
        msg = _tool_call(i, "get_forecast", arguments, FLOOD_TOKEN)
        action = engine.handle_request(msg, now=clock())
        clock.advance(1)
        if isinstance(action, gateway.Forward):
            calls_before = echo.call_count
            downstream.send(action.msg)
            engine.handle_response(downstream.last_response, now=clock())
            assert echo.call_count == calls_before + 1
            return "allowed"
        err = action.msg.obj.get("error", {})
        return {
            gateway.MSG_WAF_BLOCKED: "waf_blocked",
            gateway.MSG_RATE_LIMITED: "rate_limited",
            gateway.MSG_UNAUTHORIZED: "unauthorized",
            gateway.MSG_TOOLGUARD_BLOCKED: "toolguard_blocked",
        }.get(err.get("message"), "error")

    results = []
    i = 0
    for entry in corpus:
        calls_before = echo.call_count
        actual = issue(i, {"input": entry["payload"]})
        results.append({
            "payload": entry["payload"],
            "expected": entry["expected_verdict"],
            "actual": actual,
            "reached_downstream": echo.call_count != calls_before,
        })
        i += 1

    benign_results = []
    for arguments in benign:
        actual = issue(i, arguments)
        benign_results.append({"arguments": arguments, "actual": actual})
        i += 1

    engine.audit_log.close()
    mismatches = [r for r in results if r["expected"] != r["actual"]]
    false_positives = [r for r in benign_results if r["actual"] != "allowed"]
    return {
        "attack": results,
        "benign_total": len(benign_results),
        "benign_blocked": len(false_positives),
        "mismatches": mismatches,
        "downstream_calls": echo.call_count,
        "ok": not mismatches and not false_positives,
    }


# -- latency ------------------------------------------------------------


class _StdioClient:
    """Minimal synchronous JSON-RPC client over a child process."""

    def __init__(self, command: list):
        self.proc = subprocess.Popen(command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)

    def call(self, msg: wire.Message) -> wire.Message:
        self.proc.stdin.write(wire.encode_frame(msg) + b"\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline().rstrip(b"\n")
        return wire.decode_frame(line)

    def close(self) -> None:
        self.proc.stdin.close()
        self.proc.wait(timeout=5)


class _GuardedClient:
    """Synchronous client through an in-process gateway engine in front
    of a child echo server (the guarded scenario)."""

    def __init__(self, echo_command: list, audit_path: str):
        config = GuardianConfig.from_dict({
            "auth": {"valid_tokens": [FLOOD_TOKEN]},
            "rate_limit": {"max_requests": 10_000_000},
            "logging": {"file": audit_path},
            "downstream": {"command": echo_command},
        })
        self.engine = gateway.build_engine(config)
        self._events: dict[Any, tuple] = {}
        self._lock = threading.Lock()
        self.session = gateway.GatewaySession(self.engine, config, self._on_reply)
        self.session.start()

    def _on_reply(self, msg: wire.Message) -> None:
        with self._lock:
            waiter = self._events.get(msg.id)
        if waiter:
            waiter[1].append(msg)
            waiter[0].set()

    def call(self, msg: wire.Message) -> wire.Message:
        event = threading.Event()
        slot: list = []
        with self._lock:
            self._events[msg.id] = (event, slot)
        action = self.engine.handle_request(msg)
        if isinstance(action, gateway.Reply):
            with self._lock:
                self._events.pop(msg.id, None)
            return action.msg
        self.session.downstream.send(action.msg)
        # engine.handle_response fires via the session's reader thread
        if not event.wait(timeout=30):
            raise TimeoutError(f"no response for id {msg.id}")
        with self._lock:
            self._events.pop(msg.id, None)
        return slot[0]

    def close(self) -> None:
        self.session.close()
        self.engine.audit_log.close()


def _echo_command(delay_ms: int) -> list:
    cmd = [sys.executable, "-m", "mcp_guardian.echo_server"]
    if delay_ms:
        cmd += ["--delay-ms", str(delay_ms)]
    return cmd


def _sample(client, n: int, warmup: int, token: Optional[str]) -> list:
    for i in range(warmup):
        client.call(_tool_call(f"w{i}", "get_forecast", {"city": "NYC"}, token))
    samples = []
    for i in range(n):
        start = time.perf_counter()
        client.call(_tool_call(f"m{i}", "get_forecast", {"city": "NYC"}, token))
        samples.append((time.perf_counter() - start) * 1000.0)
    return samples


def measure_latency(n: int = 1000, warmup: int = 100, delay_ms: int = 0,
                    scenario: str = "both",
                    audit_path: str = "mcp_guardian.log") -> dict:
    """Compare direct vs guarded round-trip latency over stdio.

    One request in flight at a time; nearest-rank percentiles; warm-up
    calls are excluded from the sample.
    """
    reports: dict = {}
    baseline_samples = guarded_samples = None

    if scenario in ("baseline", "both"):
        client = _StdioClient(_echo_command(delay_ms))
        baseline_samples = _sample(client, n, warmup, token=None)
        client.close()
        reports["baseline"] = _report("baseline", baseline_samples)

    if scenario in ("guarded", "both"):
        client = _GuardedClient(_echo_command(delay_ms), audit_path)
        guarded_samples = _sample(client, n, warmup, token=FLOOD_TOKEN)
        client.close()
        reports["guarded"] = _report("guarded", guarded_samples)

    if baseline_samples and guarded_samples:
        base_med = reports["baseline"].median_ms
        guard_med = reports["guarded"].median_ms
        reports["guarded"].overhead_median_ms = guard_med - base_med
        reports["guarded"].overhead_pct = (
            (guard_med - base_med) / base_med * 100.0 if base_med > 0 else None
        )

    return {name: rep.to_dict() for name, rep in reports.items()}


def _report(scenario: str, samples: list) -> LatencyReport:
    ordered = sorted(samples)
    return LatencyReport(
        scenario=scenario,
        n=len(samples),
        median_ms=nearest_rank(ordered, 50),
        p95_ms=nearest_rank(ordered, 95),
        variance_ms=statistics.pvariance(samples) if len(samples) > 1 else 0.0,
    )
