#!/usr/bin/env python3
"""Replay the rate-limit flood experiment and print the report.

Sends n back-to-back tools/call requests through an in-process gateway
under a scripted clock (1 ms apart), so the admitted/limited split is
exactly reproducible.
"""

import argparse
import json

from mcp_guardian import bench


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=100, help="requests to send")
    parser.add_argument("--max-requests", type=int, default=5)
    parser.add_argument("--window-seconds", type=int, default=60)
    parser.add_argument("--log", default="flood_audit.log",
                        help="audit trail destination")
    args = parser.parse_args()

    report = bench.run_flood(
        args.n,
        max_requests=args.max_requests,
        window_seconds=args.window_seconds,
        audit_path=args.log,
    )
    print(json.dumps(report.to_dict(), indent=2))


if __name__ == "__main__":
    main()
