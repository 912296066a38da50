#!/usr/bin/env python3
"""End-to-end tool-poisoning demo.

Spawns the bundled echo server in "poisoned" mode (its add_numbers tool
carries hidden instructions in the description), runs a gateway session
against it, and shows that:

  1. the startup probe flags and blocks add_numbers,
  2. the poisoned tool is filtered out of tools/list,
  3. calling it anyway is refused without reaching the server,
  4. the clean get_forecast tool still works.
"""

import json
import queue
import sys
import tempfile

from mcp_guardian import gateway, wire
from mcp_guardian.config import GuardianConfig

TOKEN = "mysecrettoken123"


def main():
    audit_path = tempfile.mktemp(suffix=".log")
    config = GuardianConfig.from_dict({
        "auth": {"valid_tokens": [TOKEN]},
        "logging": {"file": audit_path},
        "downstream": {
            "command": [sys.executable, "-m", "mcp_guardian.echo_server",
                        "--mode", "poisoned"],
        },
    })
    engine = gateway.build_engine(config)

    replies = queue.Queue()
    session = gateway.GatewaySession(engine, config, replies.put)
    session.start()

    print("blocked at startup:", json.dumps(engine.blocked_tools))

    def call(request_id, method, params=None):
        obj = {"jsonrpc": "2.0", "id": request_id, "method": method}
        if params is not None:
            obj["params"] = params
        session.handle_client_line(wire.encode_frame(
            wire.Message(kind=wire.MessageKind.REQUEST, obj=obj)))
        return replies.get(timeout=10).obj

    listing = call(1, "tools/list")
    print("visible tools:", [t["name"] for t in listing["result"]["tools"]])

    refused = call(2, "tools/call", {
        "name": "add_numbers", "arguments": {"a": 1, "b": 2},
        "_meta": {"guardianToken": TOKEN},
    })
    print("calling add_numbers:", json.dumps(refused["error"]))

    forecast = call(3, "tools/call", {
        "name": "get_forecast", "arguments": {"city": "Lima"},
        "_meta": {"guardianToken": TOKEN},
    })
    print("calling get_forecast:", forecast["result"]["content"][0]["text"])

    session.close()
    print(f"audit trail written to {audit_path}")


if __name__ == "__main__":
    main()
