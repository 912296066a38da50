"""Regex WAF: compile a rule set and scan tool-call arguments.

Scanning walks the whole JSON tree: every string leaf, every object key,
and the tool name itself. All hits are reported, not just the first.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Optional

EXCERPT_LIMIT = 64


class Severity(Enum):
    BLOCK = "block"
    WARN = "warn"


class VerdictStatus(Enum):
    CLEAN = "clean"
    BLOCKED = "blocked"
    WARNED = "warned"


class RuleCompileError(Exception):
    def __init__(self, rule_id: str, reason: str):
        self.rule_id = rule_id
        self.reason = reason
        super().__init__(f"rule {rule_id!r}: {reason}")


@dataclass
class WafRule:
    rule_id: str
    pattern: str
    severity: Severity = Severity.BLOCK
    case_insensitive: bool = False
    description: str = ""
    compiled: Optional[re.Pattern] = None

    @classmethod
    def from_dict(cls, d: dict) -> "WafRule":
        return cls(
            rule_id=d["rule_id"],
            pattern=d["pattern"],
            severity=Severity(d.get("severity", "block")),
            case_insensitive=bool(d.get("case_insensitive", False)),
            description=d.get("description", ""),
        )


@dataclass(frozen=True)
class WafHit:
    rule_id: str
    json_path: str
    matched_excerpt: str
    severity: Severity


@dataclass
class WafVerdict:
    status: VerdictStatus
    hits: list = field(default_factory=list)

    @property
    def block_rule_id(self) -> Optional[str]:
        for hit in self.hits:
            if hit.severity is Severity.BLOCK:
                return hit.rule_id
        return None


@dataclass
class RuleSet:
    rules: list

    def __len__(self) -> int:
        return len(self.rules)


def default_rule_specs() -> list:
    """The shipped default rules, covering destructive shell commands,
    SQL injection, script tags, and sensitive-file references."""
    text = resources.files("mcp_guardian.data").joinpath("default_rules.json").read_text()
    return json.loads(text)


def compile_rules(specs: list, include_defaults: bool = True) -> RuleSet:
    """Validate and compile every rule; fail fast on any bad pattern.

    A WAF that silently drops a broken rule would pass traffic it was
    meant to block, so compilation errors are startup-fatal.
    """
    all_specs = []
    if include_defaults:
        all_specs.extend(default_rule_specs())
    all_specs.extend(specs)

    seen: set = set()
    rules = []
    for spec in all_specs:
        rule = spec if isinstance(spec, WafRule) else WafRule.from_dict(spec)
        if rule.rule_id in seen:
            raise RuleCompileError(rule.rule_id, "DuplicateId")
        seen.add(rule.rule_id)
        flags = re.IGNORECASE if rule.case_insensitive else 0
        try:
            rule.compiled = re.compile(rule.pattern, flags)
        except re.error as exc:
            raise RuleCompileError(rule.rule_id, str(exc)) from exc
        rules.append(rule)
    return RuleSet(rules=rules)


def _scan_text(text: str, path: str, rules: RuleSet, hits: list) -> None:
    for rule in rules.rules:
        m = rule.compiled.search(text)
        if m:
            hits.append(
                WafHit(
                    rule_id=rule.rule_id,
                    json_path=path,
                    matched_excerpt=m.group(0)[:EXCERPT_LIMIT],
                    severity=rule.severity,
                )
            )


def _walk(value: Any, path: str, rules: RuleSet, hits: list) -> None:
    if isinstance(value, str):
        _scan_text(value, path, rules, hits)
    elif isinstance(value, dict):
        for key, sub in value.items():
            # Keys are scanned too: attack strings can hide in them.
            _scan_text(str(key), f"{path}.{key}", rules, hits)
            _walk(sub, f"{path}.{key}", rules, hits)
    elif isinstance(value, list):
        for i, sub in enumerate(value):
            _walk(sub, f"{path}[{i}]", rules, hits)


def scan_params(arguments: Any, tool_name: str, rules: RuleSet) -> WafVerdict:
    """Scan a tool call exhaustively against every rule."""
    hits: list = []
    if tool_name:
        _scan_text(tool_name, "tool_name", rules, hits)
    _walk(arguments, "arguments", rules, hits)
    if any(h.severity is Severity.BLOCK for h in hits):
        status = VerdictStatus.BLOCKED
    elif hits:
        status = VerdictStatus.WARNED
    else:
        status = VerdictStatus.CLEAN
    return WafVerdict(status=status, hits=hits)
