import json
import sys

import pytest
import requests

from mcp_guardian import gateway
from mcp_guardian.config import GuardianConfig

from conftest import LEGACY_TOKEN


@pytest.fixture
def http_server(tmp_path):
    config = GuardianConfig.from_dict({
        "auth": {"valid_tokens": [LEGACY_TOKEN]},
        "logging": {"file": str(tmp_path / "audit.log")},
        "listen": {"addr": "127.0.0.1:0"},
        "downstream": {"command": [sys.executable, "-m", "mcp_guardian.echo_server"]},
    })
    server = gateway.HttpGatewayServer(config)
    server.start()
    host, port = server.address
    yield f"http://{host}:{port}"
    server.close()


def post(url, body, token=None):
    headers = {"Content-Type": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return requests.post(url, data=json.dumps(body).encode(), headers=headers, timeout=10)


def test_http_call_with_bearer(http_server):
    resp = post(http_server, {
        "jsonrpc": "2.0", "id": 1, "method": "tools/call",
        "params": {"name": "get_forecast", "arguments": {"city": "Lima"}},
    }, token=LEGACY_TOKEN)
    assert resp.status_code == 200
    assert "Lima" in resp.json()["result"]["content"][0]["text"]


def test_http_missing_token_unauthorized(http_server):
    resp = post(http_server, {
        "jsonrpc": "2.0", "id": 2, "method": "tools/call",
        "params": {"name": "get_forecast", "arguments": {"city": "Lima"}},
    })
    assert resp.json()["error"]["message"] == "Unauthorized"


def test_http_meta_token_wins_over_bearer(http_server):
    resp = post(http_server, {
        "jsonrpc": "2.0", "id": 3, "method": "tools/call",
        "params": {"name": "get_forecast", "arguments": {"city": "Lima"},
                   "_meta": {"guardianToken": "wrong"}},
    }, token=LEGACY_TOKEN)
    assert resp.json()["error"]["message"] == "Unauthorized"


def test_http_waf_block(http_server):
    resp = post(http_server, {
        "jsonrpc": "2.0", "id": 4, "method": "tools/call",
        "params": {"name": "get_forecast", "arguments": {"q": "rm -rf /"}},
    }, token=LEGACY_TOKEN)
    err = resp.json()["error"]
    assert err["message"] == "Request blocked by WAF scanning"
    assert err["data"]["rule_id"] == "destructive-shell"


def test_http_bad_body_parse_error(http_server):
    resp = requests.post(http_server, data=b"not json",
                         headers={"Content-Type": "application/json"}, timeout=10)
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == -32700


def test_http_notification_accepted(http_server):
    resp = post(http_server, {"jsonrpc": "2.0", "method": "notifications/initialized"})
    assert resp.status_code == 204
