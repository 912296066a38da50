import json

import pytest
from hypothesis import given, strategies as st

from mcp_guardian import wire

REQUEST_LINE = (
    b'{"jsonrpc":"2.0","id":1,"method":"tools/call",'
    b'"params":{"name":"get_forecast","arguments":{"city":"Paris"}}}'
)


def test_decode_request():
    msg = wire.decode_frame(REQUEST_LINE)
    assert msg.kind is wire.MessageKind.REQUEST
    assert msg.method == "tools/call"
    assert msg.id == 1


def test_decode_notification():
    msg = wire.decode_frame(b'{"jsonrpc":"2.0","method":"notifications/initialized"}')
    assert msg.kind is wire.MessageKind.NOTIFICATION
    assert msg.id is None


def test_decode_response_result_and_error():
    ok = wire.decode_frame(b'{"jsonrpc":"2.0","id":3,"result":{}}')
    err = wire.decode_frame(b'{"jsonrpc":"2.0","id":4,"error":{"code":-1,"message":"x"}}')
    assert ok.kind is err.kind is wire.MessageKind.RESPONSE


def test_not_json():
    with pytest.raises(wire.FrameError) as exc:
        wire.decode_frame(b"not json")
    assert exc.value.kind is wire.FrameErrorKind.NOT_JSON


def test_not_object():
    with pytest.raises(wire.FrameError) as exc:
        wire.decode_frame(b"[1,2,3]")
    assert exc.value.kind is wire.FrameErrorKind.NOT_OBJECT


def test_bad_shape_both_result_and_error():
    with pytest.raises(wire.FrameError) as exc:
        wire.decode_frame(b'{"id":1,"result":1,"error":1}')
    assert exc.value.kind is wire.FrameErrorKind.BAD_SHAPE


def test_bad_shape_bare_id():
    with pytest.raises(wire.FrameError):
        wire.decode_frame(b'{"id":1}')


def test_oversize_frame():
    blob = b'{"method":"x","pad":"' + b"a" * wire.MAX_FRAME_BYTES + b'"}'
    with pytest.raises(wire.FrameError) as exc:
        wire.decode_frame(blob)
    assert exc.value.kind is wire.FrameErrorKind.OVERSIZE


def test_round_trip_preserves_unknown_fields():
    line = b'{"jsonrpc":"2.0","id":1,"method":"x","future_field":{"a":[1,2]}}'
    msg = wire.decode_frame(line)
    again = wire.decode_frame(wire.encode_frame(msg))
    assert again == msg
    assert again.obj["future_field"] == {"a": [1, 2]}


def test_string_id_preserved():
    msg = wire.decode_frame(b'{"jsonrpc":"2.0","id":"a","method":"x"}')
    assert wire.decode_frame(wire.encode_frame(msg)).id == "a"


def test_encode_has_no_interior_newline():
    msg = wire.decode_frame(b'{"method":"x","params":{"text":"line1\\nline2"}}')
    assert b"\n" not in wire.encode_frame(msg)


# Random JSON values for fuzzing params round trips.
json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-2**31, 2**31) |
    st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4) |
    st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=15,
)


@given(params=json_values)
def test_params_round_trip_structural_equality(params):
    msg = wire.Message(
        kind=wire.MessageKind.REQUEST,
        obj={"jsonrpc": "2.0", "id": 1, "method": "m", "params": params},
    )
    decoded = wire.decode_frame(wire.encode_frame(msg))
    assert decoded.params == params


@given(params=json_values)
def test_encode_decode_encode_idempotent(params):
    msg = wire.Message(
        kind=wire.MessageKind.NOTIFICATION,
        obj={"jsonrpc": "2.0", "method": "m", "params": params},
    )
    once = wire.encode_frame(msg)
    assert wire.encode_frame(wire.decode_frame(once)) == once


@given(obj=st.dictionaries(
    st.sampled_from(["id", "method", "result", "error", "params", "other"]),
    st.sampled_from([1, "x", None]),
    max_size=5,
))
def test_classification_is_total(obj):
    if "method" in obj:
        obj["method"] = "m"
    try:
        kind = wire.classify(obj)
    except wire.FrameError:
        return
    assert kind in (wire.MessageKind.REQUEST, wire.MessageKind.RESPONSE,
                    wire.MessageKind.NOTIFICATION)


def test_extract_tool_call_with_token():
    msg = wire.decode_frame(json.dumps({
        "jsonrpc": "2.0", "id": 9, "method": "tools/call",
        "params": {"name": "get_forecast", "arguments": {"city": "NYC"},
                   "_meta": {"guardianToken": "mysecrettoken123"}},
    }).encode())
    call = wire.extract_tool_call(msg)
    assert call.tool_name == "get_forecast"
    assert call.arguments == {"city": "NYC"}
    assert call.presented_token == "mysecrettoken123"
    assert call.origin_id == 9


def test_extract_tool_call_without_meta():
    msg = wire.decode_frame(
        b'{"jsonrpc":"2.0","id":1,"method":"tools/call",'
        b'"params":{"name":"add_numbers","arguments":{}}}'
    )
    call = wire.extract_tool_call(msg)
    assert call.presented_token is None


def test_extract_tool_call_missing_name():
    msg = wire.decode_frame(
        b'{"jsonrpc":"2.0","id":1,"method":"tools/call","params":{"arguments":{}}}'
    )
    with pytest.raises(wire.MalformedCall):
        wire.extract_tool_call(msg)


def test_strip_guardian_token():
    msg = wire.decode_frame(json.dumps({
        "jsonrpc": "2.0", "id": 1, "method": "tools/call",
        "params": {"name": "t", "arguments": {},
                   "_meta": {"guardianToken": "s3cret", "progressToken": 5}},
    }).encode())
    stripped = wire.strip_guardian_token(msg)
    assert b"s3cret" not in wire.encode_frame(stripped)
    # other _meta entries survive
    assert stripped.params["_meta"]["progressToken"] == 5
    # original untouched
    assert msg.params["_meta"]["guardianToken"] == "s3cret"
