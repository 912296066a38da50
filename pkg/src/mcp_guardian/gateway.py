"""The proxy engine: runs every intercepted request through the security
pipeline in order (auth, scope, rate limit, WAF, toolguard) and maps
blocks to stable JSON-RPC errors.

The engine itself is transport-free decision logic; Session classes wire
it to stdio or HTTP on the client side and a child process or HTTP
endpoint downstream.
"""

from __future__ import annotations

import json
import subprocess
import sys
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

import requests

from . import audit, auth, ratelimit, toolguard, waf, wire
from .config import GuardianConfig

# JSON-RPC error codes: -32700/-32602 standard, -32001..-32004 in the
# implementation-defined range. Messages are the gateway's stable
# client-visible strings.
CODE_PARSE_ERROR = -32700
CODE_INVALID_PARAMS = -32602
CODE_UNAUTHORIZED = -32001
CODE_RATE_LIMITED = -32002
CODE_WAF_BLOCKED = -32003
CODE_TOOLGUARD_BLOCKED = -32004
CODE_AUDIT_UNAVAILABLE = -32005

MSG_UNAUTHORIZED = "Unauthorized"
MSG_RATE_LIMITED = "429 Too Many Requests"
MSG_WAF_BLOCKED = "Request blocked by WAF scanning"
MSG_TOOLGUARD_BLOCKED = "Tool blocked by guardian policy"
MSG_AUDIT_UNAVAILABLE = "audit unavailable"

PROBE_ID = "guardian:tools-list-probe"


class SpawnError(Exception):
    pass


class ProbeTimeout(Exception):
    pass


@dataclass
class Forward:
    msg: wire.Message


@dataclass
class Reply:
    msg: wire.Message


@dataclass
class Drop:
    pass


Action = Union[Forward, Reply, Drop]


def _error_reply(request_id, code: int, message: str, data: Optional[dict] = None) -> wire.Message:
    obj: dict = {
        "jsonrpc": "2.0",
        "id": request_id,
        "error": {"code": code, "message": message},
    }
    if data:
        obj["error"]["data"] = data
    return wire.Message(kind=wire.MessageKind.RESPONSE, obj=obj)


def map_block(verdict: str, request_id, trace_id: str, rule_id: Optional[str] = None,
              retry_after_ms: Optional[int] = None) -> wire.Message:
    """Build the client-visible error for a blocking verdict."""
    data: dict = {"trace_id": trace_id}
    if verdict == "unauthorized":
        return _error_reply(request_id, CODE_UNAUTHORIZED, MSG_UNAUTHORIZED, data)
    if verdict == "rate_limited":
        data["retry_after_ms"] = retry_after_ms
        return _error_reply(request_id, CODE_RATE_LIMITED, MSG_RATE_LIMITED, data)
    if verdict == "waf_blocked":
        data["rule_id"] = rule_id
        return _error_reply(request_id, CODE_WAF_BLOCKED, MSG_WAF_BLOCKED, data)
    if verdict == "toolguard_blocked":
        if rule_id:
            data["rule_id"] = rule_id
        return _error_reply(request_id, CODE_TOOLGUARD_BLOCKED, MSG_TOOLGUARD_BLOCKED, data)
    raise ValueError(f"not a blocking verdict: {verdict}")


@dataclass
class PendingEntry:
    trace_id: str
    start_ms: int
    record: audit.AuditRecord
    is_tools_list: bool = False


class GatewayEngine:
    """Decision core shared by all transports.

    handle_request / handle_response are called in client arrival order
    for one session (required for deterministic rate-limit semantics).
    """

    def __init__(
        self,
        config: GuardianConfig,
        token_store: auth.TokenStore,
        limiter: ratelimit.SlidingWindowLimiter,
        ruleset: waf.RuleSet,
        audit_log: audit.AuditLog,
        clock: Callable[[], int],
        pin_store: Optional[toolguard.PinStore] = None,
        trusted_registry: Optional[list] = None,
        session_token: Optional[str] = None,
        session_id: Optional[str] = None,
        rng=None,
    ):
        self.config = config
        self.token_store = token_store
        self.limiter = limiter
        self.ruleset = ruleset
        self.audit_log = audit_log
        self.clock = clock
        self.pin_store = pin_store or toolguard.PinStore()
        self.trusted_registry = trusted_registry or []
        self.session_token = session_token
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.rng = rng
        self.pending: dict[Any, PendingEntry] = {}
        self.blocked_tools: dict[str, str] = {}  # tool name -> blocking reason
        self.tool_findings: list = []
        self._lock = threading.Lock()

    # -- startup ----------------------------------------------------------

    def inspect_manifests(self, manifests: list) -> None:
        """Run toolguard over a tools/list snapshot (the startup probe).

        Populates blocked_tools when toolguard.mode is block; in warn
        mode findings are audited but nothing is withheld.
        """
        now = self.clock()
        all_names = {m.name for m in manifests}
        findings: list = []
        for manifest in manifests:
            findings.extend(toolguard.analyze_description(manifest, all_names))
            name_verdict = toolguard.check_name(manifest.name, self.trusted_registry)
            if name_verdict.status == "typosquat_suspect":
                findings.append(
                    toolguard.GuardFinding(
                        manifest.name,
                        toolguard.FindingKind.TYPOSQUAT_SUSPECT,
                        f"{name_verdict.target} ({name_verdict.reason})",
                    )
                )
        pin_verdicts = toolguard.verify_pins(
            manifests, self.pin_store, mode=self.config.toolguard.pin_mode, now=now
        )
        for name, verdict in pin_verdicts.items():
            if verdict is toolguard.PinVerdict.PIN_MISMATCH:
                findings.append(
                    toolguard.GuardFinding(
                        name, toolguard.FindingKind.PIN_MISMATCH, "manifest digest changed"
                    )
                )
            elif verdict is toolguard.PinVerdict.NEW:
                findings.append(
                    toolguard.GuardFinding(
                        name,
                        toolguard.FindingKind.UNPINNED,
                        "first sighting, pin recorded",
                        action=toolguard.GuardAction.WARN,
                    )
                )

        self.tool_findings = findings
        block_mode = self.config.toolguard.mode is toolguard.GuardAction.BLOCK
        for finding in findings:
            self._audit_finding(finding, now)
            if block_mode and finding.action is toolguard.GuardAction.BLOCK:
                self.blocked_tools.setdefault(finding.tool_name, finding.kind.value)

    def _audit_finding(self, finding: toolguard.GuardFinding, now: int) -> None:
        self.audit_log.record(
            audit.AuditRecord(
                ts=now,
                trace_id=audit.new_trace_id(self.rng),
                session_id=self.session_id,
                method="tools/list",
                tool_name=finding.tool_name,
                verdict="toolguard_blocked"
                if finding.action is toolguard.GuardAction.BLOCK
                else "allowed",
                rule_id=finding.kind.value,
                detail=f"toolguard finding: {finding.evidence}"[:audit.DETAIL_LIMIT],
            )
        )

    # -- request path -----------------------------------------------------

    def handle_request(self, msg: wire.Message, now: Optional[int] = None,
                       token_override: Optional[str] = None) -> Action:
        if now is None:
            now = self.clock()
        trace_id = audit.new_trace_id(self.rng)

        if msg.kind is wire.MessageKind.NOTIFICATION:
            return self._handle_notification(msg, trace_id, now)

        if msg.method == "tools/call":
            return self._handle_tool_call(msg, trace_id, now, token_override)

        if msg.method == "tools/list":
            return self._forward(msg, trace_id, now, verdict="allowed", is_tools_list=True)

        # Unknown/other methods: pass through untouched but audited.
        if msg.method in self.config.rate_limit.methods:
            verdict = self.limiter.record_and_check(self._session_token_key(), now)
            if isinstance(verdict, ratelimit.Limited):
                return self._block(
                    msg, trace_id, now, "rate_limited",
                    retry_after_ms=verdict.retry_after_ms, detail="rate limit",
                )
        return self._forward(msg, trace_id, now, verdict="passthrough")

    def _handle_notification(self, msg: wire.Message, trace_id: str, now: int) -> Action:
        # Notifications carry no id, so there is nothing to reply to;
        # they bypass the pipeline unless guard_notifications is set.
        if self.config.guard_notifications and msg.method == "tools/call":
            action = self._handle_tool_call(msg, trace_id, now)
            return action if isinstance(action, Forward) else Drop()
        self._write_record(msg, trace_id, now, verdict="passthrough")
        return Forward(msg)

    def _handle_tool_call(self, msg: wire.Message, trace_id: str, now: int,
                          token_override: Optional[str] = None) -> Action:
        try:
            call = wire.extract_tool_call(msg)
        except wire.MalformedCall as exc:
            self._write_record(msg, trace_id, now, verdict="error", detail=str(exc))
            return Reply(_error_reply(msg.id, CODE_INVALID_PARAMS, "Invalid params",
                                      {"trace_id": trace_id}))

        # Per-request _meta token wins over the HTTP bearer, which wins
        # over the session-level env token.
        presented = call.presented_token or token_override or self.session_token

        # 1. auth
        try:
            principal = self.token_store.validate_token(presented, now)
        except auth.Unauthorized as exc:
            return self._block(msg, trace_id, now, "unauthorized",
                               tool_name=call.tool_name, detail=exc.reason.value)

        # 2. scope
        if not auth.check_scope(principal, call.tool_name):
            return self._block(msg, trace_id, now, "unauthorized",
                               token_id=principal.token_id, tool_name=call.tool_name,
                               detail="scope")

        # 3. rate limit
        if msg.method in self.config.rate_limit.methods:
            verdict = self.limiter.record_and_check(principal.token_id, now)
            if isinstance(verdict, ratelimit.Limited):
                return self._block(msg, trace_id, now, "rate_limited",
                                   token_id=principal.token_id, tool_name=call.tool_name,
                                   retry_after_ms=verdict.retry_after_ms,
                                   detail="rate limit exceeded")

        # 4. WAF
        scan = waf.scan_params(call.arguments, call.tool_name, self.ruleset)
        if scan.status is waf.VerdictStatus.BLOCKED:
            return self._block(msg, trace_id, now, "waf_blocked",
                               token_id=principal.token_id, tool_name=call.tool_name,
                               rule_id=scan.block_rule_id,
                               detail=f"hit at {scan.hits[0].json_path}")
        warn_detail = ""
        if scan.status is waf.VerdictStatus.WARNED:
            warn_detail = "waf warn: " + ",".join(h.rule_id for h in scan.hits)

        # 5. toolguard call-time re-check
        if call.tool_name in self.blocked_tools:
            return self._block(msg, trace_id, now, "toolguard_blocked",
                               token_id=principal.token_id, tool_name=call.tool_name,
                               rule_id=self.blocked_tools[call.tool_name],
                               detail="blocked tool manifest")

        # 6. forward with the credential stripped
        stripped = wire.strip_guardian_token(msg)
        return self._forward(stripped, trace_id, now, verdict="allowed",
                             token_id=principal.token_id, tool_name=call.tool_name,
                             detail=warn_detail)

    def _session_token_key(self) -> str:
        if self.session_token:
            try:
                return self.token_store.validate_token(self.session_token, self.clock()).token_id
            except auth.Unauthorized:
                pass
        return "anonymous"

    def _make_record(self, msg: wire.Message, trace_id: str, now: int, verdict: str,
                     token_id: str = "-", tool_name: str = "-", rule_id: str = "-",
                     detail: str = "") -> audit.AuditRecord:
        params = msg.params
        if self.config.logging.raw_params and params is not None:
            raw = json.dumps(params, ensure_ascii=False)
            detail = (detail + " params=" + raw).strip()
        return audit.AuditRecord(
            ts=now,
            trace_id=trace_id,
            session_id=self.session_id,
            token_id=token_id,
            method=msg.method or "-",
            tool_name=tool_name,
            verdict=verdict,
            rule_id=rule_id,
            params_digest=audit.params_digest(params) if params is not None else "-",
            detail=detail,
        )

    def _write_record(self, msg, trace_id, now, verdict, **kw) -> audit.AuditRecord:
        rec = self._make_record(msg, trace_id, now, verdict, **kw)
        self.audit_log.record(rec)
        return rec

    def _block(self, msg, trace_id, now, verdict, token_id="-", tool_name="-",
               rule_id=None, retry_after_ms=None, detail="") -> Action:
        # Write-ahead: the record must be durable before the error reply.
        try:
            self._write_record(msg, trace_id, now, verdict, token_id=token_id,
                               tool_name=tool_name, rule_id=rule_id or "-", detail=detail)
        except audit.SinkIoError:
            return Reply(_error_reply(msg.id, CODE_AUDIT_UNAVAILABLE,
                                      MSG_AUDIT_UNAVAILABLE, {"trace_id": trace_id}))
        if msg.kind is wire.MessageKind.NOTIFICATION:
            return Drop()
        return Reply(map_block(verdict, msg.id, trace_id, rule_id=rule_id,
                               retry_after_ms=retry_after_ms))

    def _forward(self, msg, trace_id, now, verdict, token_id="-", tool_name="-",
                 detail="", is_tools_list=False) -> Action:
        rec = self._make_record(msg, trace_id, now, verdict,
                                token_id=token_id, tool_name=tool_name, detail=detail)
        if msg.kind is wire.MessageKind.NOTIFICATION:
            # No response will come; the record is final now.
            try:
                self.audit_log.record(rec)
            except audit.SinkIoError:
                return Drop()
            return Forward(msg)
        with self._lock:
            self.pending[msg.id] = PendingEntry(
                trace_id=trace_id, start_ms=now, record=rec, is_tools_list=is_tools_list
            )
        return Forward(msg)

    # -- response path ----------------------------------------------------

    def handle_response(self, msg: wire.Message, now: Optional[int] = None) -> Optional[wire.Message]:
        """Complete the audit record for a downstream response and return
        the message to relay to the client (None for drops)."""
        if now is None:
            now = self.clock()
        with self._lock:
            entry = self.pending.pop(msg.id, None)
        if entry is None:
            if isinstance(msg.id, str) and msg.id.startswith("guardian:"):
                return None  # internal probe traffic, handled by the caller
            self.audit_log.record(audit.AuditRecord(
                ts=now, trace_id=audit.new_trace_id(self.rng),
                session_id=self.session_id, verdict="error",
                detail=f"orphan response id={msg.id!r}",
            ))
            return None

        relay = msg
        rec = entry.record
        if entry.is_tools_list and msg.has_result() and isinstance(msg.result, dict):
            filtered, removed = toolguard.filter_tools_list(msg.result, set(self.blocked_tools))
            if removed:
                obj = dict(msg.obj)
                obj["result"] = filtered
                relay = wire.Message(kind=msg.kind, obj=obj)
                rec.detail = (rec.detail + f" removed={','.join(removed)}").strip()

        payload = relay.obj.get("result", relay.obj.get("error"))
        rec.response_digest = audit.params_digest(payload)
        rec.downstream_ms = now - entry.start_ms
        try:
            self.audit_log.record(rec)
        except audit.SinkIoError:
            return _error_reply(msg.id, CODE_AUDIT_UNAVAILABLE, MSG_AUDIT_UNAVAILABLE,
                                {"trace_id": entry.trace_id})
        return relay

    def handle_bad_frame(self, exc: wire.FrameError, now: Optional[int] = None) -> wire.Message:
        if now is None:
            now = self.clock()
        trace_id = audit.new_trace_id(self.rng)
        self.audit_log.record(audit.AuditRecord(
            ts=now, trace_id=trace_id, session_id=self.session_id,
            verdict="error", detail=f"frame error: {exc.kind.value}",
        ))
        return _error_reply(None, CODE_PARSE_ERROR, "Parse error", {"trace_id": trace_id})

    def finish(self) -> None:
        """Flush records for requests that never got a response."""
        now = self.clock()
        with self._lock:
            entries = list(self.pending.values())
            self.pending.clear()
        for entry in entries:
            entry.record.detail = (entry.record.detail + " no response before session end").strip()
            self.audit_log.record(entry.record)


# -- downstream transports --------------------------------------------------


class StdioDownstream:
    """Child MCP server over stdio pipes; a reader thread delivers each
    response line to the supplied callback."""

    def __init__(self, command: list, on_frame: Callable[[bytes], None]):
        try:
            self.proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise SpawnError(f"cannot spawn {command!r}: {exc}") from exc
        self.on_frame = on_frame
        self._write_lock = threading.Lock()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def send(self, msg: wire.Message) -> None:
        line = wire.encode_frame(msg) + b"\n"
        with self._write_lock:
            self.proc.stdin.write(line)
            self.proc.stdin.flush()

    def _read_loop(self) -> None:
        for line in self.proc.stdout:
            line = line.rstrip(b"\n")
            if line:
                self.on_frame(line)

    def close(self) -> None:
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()


class HttpDownstream:
    """One JSON-RPC message per HTTP POST; the response body is the
    reply frame, delivered through the same callback as stdio."""

    def __init__(self, url: str, on_frame: Callable[[bytes], None]):
        self.url = url
        self.on_frame = on_frame

    def send(self, msg: wire.Message) -> None:
        resp = requests.post(
            self.url,
            data=wire.encode_frame(msg),
            headers={"Content-Type": "application/json"},
            timeout=30,
        )
        body = resp.content.strip()
        if body:
            self.on_frame(body)

    def close(self) -> None:
        pass


def real_clock_ms() -> int:
    return int(time.time() * 1000)


class GatewaySession:
    """Owns one engine plus its downstream; performs the startup probe
    and routes frames in both directions."""

    def __init__(self, engine: GatewayEngine, config: GuardianConfig,
                 send_to_client: Callable[[wire.Message], None],
                 downstream=None):
        self.engine = engine
        self.config = config
        self.send_to_client = send_to_client
        self._client_lock = threading.Lock()
        self._probe_event = threading.Event()
        self._probe_result: Optional[wire.Message] = None
        if downstream is not None:
            self.downstream = downstream
        elif config.downstream.command:
            self.downstream = StdioDownstream(config.downstream.command, self._on_downstream_frame)
        elif config.downstream.url:
            self.downstream = HttpDownstream(config.downstream.url, self._on_downstream_frame)
        else:
            raise SpawnError("no downstream configured (downstream.command or downstream.url)")

    def start(self) -> None:
        """Issue the tools/list probe and run toolguard before any client
        call is admitted."""
        probe = wire.Message(
            kind=wire.MessageKind.REQUEST,
            obj={"jsonrpc": "2.0", "id": PROBE_ID, "method": "tools/list"},
        )
        self.downstream.send(probe)
        if not self._probe_event.wait(timeout=self.config.probe_timeout_s):
            raise ProbeTimeout(f"no tools/list response within {self.config.probe_timeout_s}s")
        result = self._probe_result.obj.get("result") if self._probe_result else None
        manifests = toolguard.manifests_from_tools_list(result or {})
        self.engine.inspect_manifests(manifests)
        self.engine.audit_log.record(audit.AuditRecord(
            ts=self.engine.clock(),
            trace_id=audit.new_trace_id(self.engine.rng),
            session_id=self.engine.session_id,
            method="tools/list",
            verdict="allowed",
            detail=f"startup probe: {len(manifests)} tools",
        ))

    def _on_downstream_frame(self, line: bytes) -> None:
        try:
            msg = wire.decode_frame(line)
        except wire.FrameError:
            return  # a garbled downstream frame is dropped, never relayed
        if msg.id == PROBE_ID:
            self._probe_result = msg
            self._probe_event.set()
            return
        relay = self.engine.handle_response(msg)
        if relay is not None:
            self._write_client(relay)

    def _write_client(self, msg: wire.Message) -> None:
        with self._client_lock:
            self.send_to_client(msg)

    def handle_client_line(self, line: bytes) -> None:
        try:
            msg = wire.decode_frame(line)
        except wire.FrameError as exc:
            self._write_client(self.engine.handle_bad_frame(exc))
            return
        if msg.kind is wire.MessageKind.RESPONSE:
            # Client-to-server responses (e.g. sampling) pass through.
            self.downstream.send(msg)
            return
        action = self.engine.handle_request(msg)
        if isinstance(action, Reply):
            self._write_client(action.msg)
        elif isinstance(action, Forward):
            self.downstream.send(action.msg)

    def close(self) -> None:
        self.engine.finish()
        self.downstream.close()


def build_engine(config: GuardianConfig, clock=real_clock_ms,
                 session_token: Optional[str] = None, rng=None) -> GatewayEngine:
    """Assemble an engine from configuration (stores, limiter, rules)."""
    token_store = auth.TokenStore(config.auth.token_store)
    if config.auth.valid_tokens:
        token_store.load_legacy_tokens(config.auth.valid_tokens)

    extra_rules: list = []
    if config.waf.rules_path:
        with open(config.waf.rules_path, encoding="utf-8") as fh:
            extra_rules = json.load(fh)
    ruleset = waf.compile_rules(extra_rules, include_defaults=config.waf.include_defaults)

    limiter = ratelimit.SlidingWindowLimiter(
        max_requests=config.rate_limit.max_requests,
        window_ms=config.rate_limit.window_ms,
    )

    shipper = None
    if config.logging.remote_url:
        shipper = audit.RemoteShipper(config.logging.remote_url,
                                      queue_size=config.logging.queue_size)
    audit_log = audit.AuditLog(config.logging.file, shipper=shipper)

    registry: list = []
    if config.toolguard.registry_file:
        with open(config.toolguard.registry_file, encoding="utf-8") as fh:
            registry = json.load(fh)
    pin_store = toolguard.PinStore(config.toolguard.pin_file)

    if session_token is None:
        session_token = auth.session_token_from_env()

    return GatewayEngine(
        config=config,
        token_store=token_store,
        limiter=limiter,
        ruleset=ruleset,
        audit_log=audit_log,
        clock=clock,
        pin_store=pin_store,
        trusted_registry=registry,
        session_token=session_token,
        rng=rng,
    )


def serve_stdio(config: GuardianConfig, stdin=None, stdout=None) -> int:
    """Run one stdio session: client on our stdio, downstream spawned.
    Blocks until client EOF or downstream exit."""
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer

    engine = build_engine(config)

    def send_to_client(msg: wire.Message) -> None:
        stdout.write(wire.encode_frame(msg) + b"\n")
        stdout.flush()

    session = GatewaySession(engine, config, send_to_client)
    session.start()
    try:
        for line in stdin:
            line = line.rstrip(b"\n")
            if line:
                session.handle_client_line(line)
    finally:
        session.close()
    return 0


class HttpGatewayServer:
    """HTTP POST listener: one JSON-RPC message per request body, the
    relayed response (or block error) per response body.

    An ``Authorization: Bearer`` header acts as the session-level token
    for that request.
    """

    def __init__(self, config: GuardianConfig, addr: Optional[str] = None,
                 engine: Optional[GatewayEngine] = None, downstream=None):
        from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

        self.config = config
        self.engine = engine or build_engine(config)
        self._waiters: dict[Any, tuple] = {}
        self._waiters_lock = threading.Lock()
        self.session = GatewaySession(self.engine, config, self._route_to_waiter,
                                      downstream=downstream)

        host, _, port = (addr or config.listen_addr or "127.0.0.1:0").rpartition(":")
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 (http.server API)
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length).strip()
                bearer = None
                authz = self.headers.get("Authorization", "")
                if authz.startswith("Bearer "):
                    bearer = authz[len("Bearer "):].strip()
                status, reply = outer._handle_http_body(body, bearer)
                if reply is None:
                    self.send_response(status)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                payload = wire.encode_frame(reply) + b"\n"
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, fmt, *args):
                pass  # protocol traffic is audited, not access-logged

        self._httpd = ThreadingHTTPServer((host or "127.0.0.1", int(port)), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def address(self) -> tuple:
        return self._httpd.server_address

    def start(self) -> None:
        self.session.start()
        self._thread.start()

    def _route_to_waiter(self, msg: wire.Message) -> None:
        with self._waiters_lock:
            waiter = self._waiters.get(msg.id)
        if waiter is not None:
            waiter[1].append(msg)
            waiter[0].set()

    def _handle_http_body(self, body: bytes, bearer: Optional[str]) -> tuple:
        try:
            msg = wire.decode_frame(body)
        except wire.FrameError as exc:
            return 400, self.engine.handle_bad_frame(exc)
        if msg.kind is wire.MessageKind.NOTIFICATION:
            action = self.engine.handle_request(msg, token_override=bearer)
            if isinstance(action, Forward):
                self.session.downstream.send(action.msg)
            return 204, None
        if msg.kind is wire.MessageKind.RESPONSE:
            self.session.downstream.send(msg)
            return 204, None

        action = self.engine.handle_request(msg, token_override=bearer)
        if isinstance(action, Reply):
            return 200, action.msg
        event = threading.Event()
        slot: list = []
        with self._waiters_lock:
            self._waiters[msg.id] = (event, slot)
        try:
            self.session.downstream.send(action.msg)
            if not event.wait(timeout=30):
                return 504, _error_reply(msg.id, -32000, "downstream timeout", None)
            return 200, slot[0]
        finally:
            with self._waiters_lock:
                self._waiters.pop(msg.id, None)

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self.session.close()


def serve_http(config: GuardianConfig) -> int:
    """Run the HTTP listener until interrupted."""
    server = HttpGatewayServer(config)
    server.start()
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        return 0
    finally:
        server.close()

