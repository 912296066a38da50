#!/usr/bin/env python3
"""Measure round-trip latency with and without the gateway in the path.

Spawns the bundled echo server as a subprocess, drives it directly
(baseline) and through the gateway (guarded), and reports nearest-rank
median/p95 plus the gateway's overhead. Use --delay-ms to simulate a
slower tool and see the overhead shrink in relative terms.
"""

import argparse
import json

from mcp_guardian import bench


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=1000, help="measured calls")
    parser.add_argument("--warmup", type=int, default=100)
    parser.add_argument("--delay-ms", type=int, default=0,
                        help="artificial per-call delay in the echo server")
    parser.add_argument("--scenario", choices=["both", "baseline", "guarded"],
                        default="both")
    parser.add_argument("--log", default="latency_audit.log")
    args = parser.parse_args()

    report = bench.measure_latency(
        n=args.n, warmup=args.warmup, delay_ms=args.delay_ms,
        scenario=args.scenario, audit_path=args.log,
    )
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
