"""Operator CLI: run the gateway, manage tokens/pins/rules, and drive
the offline scan and experiment verbs.

All subcommand output is JSON on stdout (pretty-printed with --pretty);
diagnostics go to stderr. Exit codes: 0 success, 1 operational error,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import auth, bench, gateway, toolguard, waf
from .config import ConfigError, GuardianConfig


def _emit(obj, pretty: bool) -> None:
    if pretty:
        print(json.dumps(obj, indent=2, sort_keys=False))
    else:
        print(json.dumps(obj, separators=(",", ":")))


def _load_config(args) -> GuardianConfig:
    config = GuardianConfig.from_file(args.config) if args.config else GuardianConfig()
    if getattr(args, "log", None):
        config.logging.file = args.log
    if getattr(args, "strict", False):
        config.toolguard.pin_mode = toolguard.PinMode.STRICT
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcp-guardian")
    parser.add_argument("--config", help="path to the JSON config document")
    parser.add_argument("--pretty", action="store_true", help="indent JSON output")
    parser.add_argument("--strict", action="store_true", help="strict pin mode (no TOFU)")
    parser.add_argument("--log", help="override the audit log path")
    sub = parser.add_subparsers(dest="verb", required=True)

    sub.add_parser("run", help="serve until downstream exit or EOF")

    p = sub.add_parser("token-create", help="issue a token; prints the secret once")
    p.add_argument("--ttl", type=int, default=None, help="lifetime in seconds")
    p.add_argument("--scope", action="append", default=[], help="tool-name pattern (repeatable)")
    p.add_argument("--store", help="token store file (overrides config)")

    p = sub.add_parser("token-list", help="list token ids and scopes (never secrets)")
    p.add_argument("--store", help="token store file (overrides config)")

    p = sub.add_parser("token-revoke", help="revoke a token by id")
    p.add_argument("token_id")
    p.add_argument("--store", help="token store file (overrides config)")

    p = sub.add_parser("pin-list", help="list pinned manifest digests")
    p.add_argument("--pin-file", help="pin store file (overrides config)")

    p = sub.add_parser("pin-add", help="pin a tool name to a manifest digest")
    p.add_argument("name")
    p.add_argument("digest")
    p.add_argument("--pin-file", help="pin store file (overrides config)")

    p = sub.add_parser("rules-lint", help="validate a WAF rules file")
    p.add_argument("rules_file")

    p = sub.add_parser("rules-test", help="scan a payload file and print the verdict")
    p.add_argument("payload_file")

    p = sub.add_parser("scan", help="offline toolguard analysis of a manifest file")
    p.add_argument("manifest_file")
    p.add_argument("--registry", help="trusted-names JSON file")

    p = sub.add_parser("flood", help="deterministic rate-limit flood experiment")
    p.add_argument("--n", type=int, default=100)

    p = sub.add_parser("attack-sim", help="replay the attack corpus through the pipeline")
    p.add_argument("--corpus", help="JSON array of {payload, expected_verdict}")

    p = sub.add_parser("bench", help="latency comparison: direct vs guarded")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--warmup", type=int, default=100)
    p.add_argument("--delay-ms", type=int, default=0)
    p.add_argument("--scenario", choices=["baseline", "guarded", "both"], default="both")

    return parser


def _token_store(args, config: GuardianConfig) -> auth.TokenStore:
    path = getattr(args, "store", None) or config.auth.token_store
    return auth.TokenStore(path)


def _pin_store(args, config: GuardianConfig) -> toolguard.PinStore:
    path = getattr(args, "pin_file", None) or config.toolguard.pin_file
    return toolguard.PinStore(path)


def dispatch(args) -> int:
    config = _load_config(args)
    pretty = args.pretty

    if args.verb == "run":
        if config.listen_addr:
            return gateway.serve_http(config)
        return gateway.serve_stdio(config)

    if args.verb == "token-create":
        store = _token_store(args, config)
        ttl_ms = args.ttl * 1000 if args.ttl else None
        secret, record = store.issue_token(
            scopes=args.scope, ttl_ms=ttl_ms, now=gateway.real_clock_ms()
        )
        _emit({"token_id": record.token_id, "secret": secret,
               "scopes": sorted(record.scopes), "expires_at": record.expires_at,
               "store": store.path}, pretty)
        return 0

    if args.verb == "token-list":
        store = _token_store(args, config)
        _emit([
            {"token_id": r.token_id, "scopes": sorted(r.scopes),
             "expires_at": r.expires_at, "revoked": r.revoked}
            for r in store.records()
        ], pretty)
        return 0

    if args.verb == "token-revoke":
        store = _token_store(args, config)
        try:
            store.revoke_token(args.token_id)
        except auth.UnknownTokenId:
            print(f"unknown token id: {args.token_id}", file=sys.stderr)
            return 1
        _emit({"revoked": args.token_id, "store": store.path}, pretty)
        return 0

    if args.verb == "pin-list":
        pins = _pin_store(args, config)
        _emit([
            {"name": p.name, "digest": p.digest, "first_seen": p.first_seen}
            for p in pins.entries()
        ], pretty)
        return 0

    if args.verb == "pin-add":
        pins = _pin_store(args, config)
        pins.add(args.name, args.digest, now=gateway.real_clock_ms())
        _emit({"pinned": args.name, "digest": args.digest, "store": pins.path}, pretty)
        return 0

    if args.verb == "rules-lint":
        try:
            with open(args.rules_file, encoding="utf-8") as fh:
                specs = json.load(fh)
            ruleset = waf.compile_rules(specs, include_defaults=config.waf.include_defaults)
        except (OSError, ValueError) as exc:
            print(f"cannot read rules: {exc}", file=sys.stderr)
            return 1
        except waf.RuleCompileError as exc:
            _emit({"ok": False, "rule_id": exc.rule_id, "reason": exc.reason}, pretty)
            return 1
        _emit({"ok": True, "rules": len(ruleset)}, pretty)
        return 0

    if args.verb == "rules-test":
        try:
            with open(args.payload_file, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"cannot read payload: {exc}", file=sys.stderr)
            return 1
        try:
            payload = json.loads(text)
        except ValueError:
            payload = {"payload": text}
        ruleset = waf.compile_rules([], include_defaults=config.waf.include_defaults)
        verdict = waf.scan_params(payload, "", ruleset)
        _emit({
            "status": verdict.status.value,
            "hits": [
                {"rule_id": h.rule_id, "json_path": h.json_path,
                 "matched_excerpt": h.matched_excerpt}
                for h in verdict.hits
            ],
        }, pretty)
        return 0

    if args.verb == "scan":
        try:
            with open(args.manifest_file, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            print(f"cannot read manifest: {exc}", file=sys.stderr)
            return 1
        registry: list = []
        registry_path = args.registry or config.toolguard.registry_file
        if registry_path:
            with open(registry_path, encoding="utf-8") as fh:
                registry = json.load(fh)
        manifests = [toolguard.ToolManifest.from_dict(d)
                     for d in (doc if isinstance(doc, list) else [doc])]
        names = {m.name for m in manifests}
        out = []
        for manifest in manifests:
            findings = [f.to_dict() for f in toolguard.analyze_description(manifest, names)]
            name_verdict = toolguard.check_name(manifest.name, registry)
            out.append({
                "name": manifest.name,
                "digest": toolguard.pin_digest(manifest),
                "name_verdict": {
                    "status": name_verdict.status,
                    "target": name_verdict.target,
                    "reason": name_verdict.reason,
                },
                "findings": findings,
            })
        _emit(out, pretty)
        return 0

    if args.verb == "flood":
        report = bench.run_flood(args.n, audit_path=config.logging.file)
        _emit(report.to_dict(), pretty)
        return 0

    if args.verb == "attack-sim":
        corpus = None
        if args.corpus:
            with open(args.corpus, encoding="utf-8") as fh:
                corpus = json.load(fh)
        report = bench.run_attack_corpus(corpus, audit_path=config.logging.file)
        _emit(report, pretty)
        return 0 if report["ok"] else 1

    if args.verb == "bench":
        report = bench.measure_latency(
            n=args.n, warmup=args.warmup, delay_ms=args.delay_ms,
            scenario=args.scenario, audit_path=config.logging.file,
        )
        _emit(report, pretty)
        return 0

    raise AssertionError(f"unhandled verb {args.verb}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return dispatch(args)
    except (ConfigError, gateway.SpawnError, gateway.ProbeTimeout,
            toolguard.PinStoreIoError) as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
