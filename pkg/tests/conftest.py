import json
import random

import pytest

from mcp_guardian import auth, bench, gateway, waf, wire
from mcp_guardian.config import GuardianConfig
from mcp_guardian.echo_server import EchoServer

LEGACY_TOKEN = "mysecrettoken123"
OTHER_LEGACY_TOKEN = "anotherValidToken456"


@pytest.fixture
def default_ruleset():
    return waf.compile_rules([])


@pytest.fixture
def token_store():
    store = auth.TokenStore()
    store.load_legacy_tokens([LEGACY_TOKEN, OTHER_LEGACY_TOKEN])
    return store


@pytest.fixture
def clock():
    return bench.ScriptedClock()


def make_engine(tmp_path, clock, config_overrides=None, session_token=None, rng=None):
    doc = {
        "auth": {"valid_tokens": [LEGACY_TOKEN, OTHER_LEGACY_TOKEN]},
        "logging": {"file": str(tmp_path / "audit.log")},
    }
    for key, value in (config_overrides or {}).items():
        if isinstance(value, dict):
            doc.setdefault(key, {}).update(value)
        else:
            doc[key] = value
    config = GuardianConfig.from_dict(doc)
    engine = gateway.build_engine(
        config, clock=clock, session_token=session_token,
        rng=rng or random.Random(7),
    )
    return engine, config


@pytest.fixture
def engine(tmp_path, clock):
    eng, _ = make_engine(tmp_path, clock)
    return eng


def tool_call_msg(request_id, tool="get_forecast", arguments=None, token=LEGACY_TOKEN):
    params = {"name": tool, "arguments": arguments if arguments is not None else {"city": "NYC"}}
    if token is not None:
        params["_meta"] = {"guardianToken": token}
    return wire.Message(
        kind=wire.MessageKind.REQUEST,
        obj={"jsonrpc": "2.0", "id": request_id, "method": "tools/call", "params": params},
    )


def pump(engine, downstream, msg, now=None):
    """Run one request through the engine against a loopback downstream;
    returns the client-visible reply message."""
    action = engine.handle_request(msg, now=now)
    if isinstance(action, gateway.Reply):
        return action.msg
    if isinstance(action, gateway.Drop):
        return None
    downstream.send(action.msg)
    if downstream.last_response is None:
        return None
    return engine.handle_response(downstream.last_response, now=now)


@pytest.fixture
def loopback():
    echo = EchoServer()
    return bench.LoopbackDownstream(echo)


def read_audit(tmp_path):
    path = tmp_path / "audit.log"
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line]
