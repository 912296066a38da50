#!/usr/bin/env python3
"""Replay the attack corpus (plus the benign corpus) through the gateway.

Prints a per-payload verdict table and fails (exit 1) if any attack
reached the downstream server or any benign request was blocked.
"""

import argparse
import json
import sys

from mcp_guardian import bench


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", help="JSON file of payload entries "
                        "(default: bundled attack corpus)")
    parser.add_argument("--log", default="attack_audit.log")
    args = parser.parse_args()

    corpus = None
    if args.corpus:
        with open(args.corpus) as fh:
            corpus = json.load(fh)

    report = bench.run_attack_corpus(corpus, audit_path=args.log)
    print(json.dumps(report, indent=2))
    sys.exit(0 if report["ok"] else 1)


if __name__ == "__main__":
    main()
