"""JSON-RPC 2.0 framing for MCP stdio transport.

Messages are newline-delimited JSON objects, one per line, no embedded
newlines. Unknown fields are preserved verbatim so the gateway can pass
frames through without breaking protocol evolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

MAX_FRAME_BYTES = 1024 * 1024

# Sentinel distinguishing "field absent" from "field present and null".
_ABSENT = object()


class MessageKind(Enum):
    REQUEST = "request"
    RESPONSE = "response"
    NOTIFICATION = "notification"


class FrameErrorKind(Enum):
    NOT_JSON = "not_json"
    NOT_OBJECT = "not_object"
    BAD_SHAPE = "bad_shape"
    OVERSIZE = "oversize"


class FrameError(Exception):
    """A frame that cannot be classified as any JSON-RPC message."""

    def __init__(self, kind: FrameErrorKind, detail: str = ""):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind.value}: {detail}" if detail else kind.value)


class MalformedCall(Exception):
    """A tools/call request missing a usable tool name (invalid params)."""


@dataclass
class Message:
    """One classified JSON-RPC frame.

    ``obj`` holds the full parsed JSON object; the convenience fields
    are views into it. Serialization always goes through ``obj`` so
    unknown fields survive a round trip.
    """

    kind: MessageKind
    obj: dict = field(default_factory=dict)

    @property
    def id(self) -> Union[int, str, None]:
        return self.obj.get("id")

    @property
    def method(self) -> Optional[str]:
        return self.obj.get("method")

    @property
    def params(self) -> Any:
        return self.obj.get("params")

    @property
    def result(self) -> Any:
        return self.obj.get("result", _ABSENT)

    @property
    def error(self) -> Any:
        return self.obj.get("error", _ABSENT)

    def has_result(self) -> bool:
        return "result" in self.obj

    def has_error(self) -> bool:
        return "error" in self.obj


@dataclass
class ToolCall:
    """The security-relevant view of a tools/call request."""

    tool_name: str
    arguments: dict
    presented_token: Optional[str]
    origin_id: Union[int, str, None]


def classify(obj: dict) -> MessageKind:
    """Total classification: every JSON object maps to exactly one kind
    or raises FrameError(BAD_SHAPE)."""
    has_method = "method" in obj
    has_id = "id" in obj
    has_result = "result" in obj
    has_error = "error" in obj

    if has_method:
        if not isinstance(obj["method"], str):
            raise FrameError(FrameErrorKind.BAD_SHAPE, "method must be a string")
        return MessageKind.REQUEST if has_id else MessageKind.NOTIFICATION
    if has_id and (has_result != has_error):
        return MessageKind.RESPONSE
    raise FrameError(
        FrameErrorKind.BAD_SHAPE,
        "no method; need id plus exactly one of result/error",
    )


def decode_frame(line: Union[bytes, str]) -> Message:
    """Parse one frame (without its newline terminator) into a Message."""
    if isinstance(line, str):
        line = line.encode("utf-8")
    if len(line) > MAX_FRAME_BYTES:
        raise FrameError(FrameErrorKind.OVERSIZE, f"{len(line)} bytes")
    try:
        obj = json.loads(line)
    except (ValueError, UnicodeDecodeError) as exc:
        raise FrameError(FrameErrorKind.NOT_JSON, str(exc)) from exc
    if not isinstance(obj, dict):
        raise FrameError(FrameErrorKind.NOT_OBJECT, type(obj).__name__)
    return Message(kind=classify(obj), obj=obj)


def encode_frame(msg: Message) -> bytes:
    """Serialize to one line of JSON (no trailing newline)."""
    return json.dumps(msg.obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def extract_tool_call(msg: Message) -> ToolCall:
    """Pull the tool name, arguments, and per-request token out of a
    tools/call request.

    The token rides in ``params._meta.guardianToken``; a missing token
    here falls back to the session-level token at the gateway layer.
    """
    if msg.kind is not MessageKind.REQUEST or msg.method != "tools/call":
        raise MalformedCall("not a tools/call request")
    params = msg.params if isinstance(msg.params, dict) else {}
    name = params.get("name")
    if not isinstance(name, str) or not name:
        raise MalformedCall("params.name missing or not a string")
    arguments = params.get("arguments")
    if not isinstance(arguments, dict):
        arguments = {}
    token = None
    meta = params.get("_meta")
    if isinstance(meta, dict):
        raw = meta.get("guardianToken")
        if isinstance(raw, str):
            token = raw
    return ToolCall(
        tool_name=name,
        arguments=arguments,
        presented_token=token,
        origin_id=msg.id,
    )


def strip_guardian_token(msg: Message) -> Message:
    """Return a copy of a tools/call request with the guardian token
    removed, safe to forward downstream."""
    obj = json.loads(json.dumps(msg.obj))
    params = obj.get("params")
    if isinstance(params, dict):
        meta = params.get("_meta")
        if isinstance(meta, dict):
            meta.pop("guardianToken", None)
            if not meta:
                params.pop("_meta")
    return Message(kind=msg.kind, obj=obj)
