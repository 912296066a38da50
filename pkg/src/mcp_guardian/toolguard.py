"""Tool manifest defenses: poisoned-description heuristics, typosquat
detection, and rug-pull protection via content-digest pinning.

The guardian only sees the protocol surface, so pins cover the manifest
(name, description, input schema), not server code.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

# Heuristic patterns for poisoned descriptions.
POISON_TAG_RE = re.compile(r"(?i)<\s*(important|secret|hidden|system)\b")
CONCEALMENT_RE = re.compile(
    r"(?i)do\s+not\s+(reveal|disclose|tell)|don't\s+tell|hide\s+this|not\s+reveal\s+these\s+steps"
)
SHADOWING_TRIGGER_RE = re.compile(r"(?i)(modif|overrid|redirect|re-rout|instead\s+of|behavior\s+of)")
SENSITIVE_PATH_RES = {
    "sensitive-path-ssh": re.compile(r"\.ssh/id_rsa"),
    "sensitive-path-mcp-config": re.compile(r"\.cursor/mcp\.json"),
}
SHADOWING_PROXIMITY_CHARS = 80


class FindingKind(Enum):
    POISON_TAG = "PoisonTag"
    SENSITIVE_PATH_REF = "SensitivePathRef"
    CONCEALMENT_PHRASE = "ConcealmentPhrase"
    CROSS_TOOL_SHADOWING = "CrossToolShadowing"
    TYPOSQUAT_SUSPECT = "TyposquatSuspect"
    PIN_MISMATCH = "PinMismatch"
    UNPINNED = "Unpinned"


class GuardAction(Enum):
    BLOCK = "block"
    WARN = "warn"


class PinVerdict(Enum):
    OK = "ok"
    NEW = "new"
    PIN_MISMATCH = "pin_mismatch"


class PinMode(Enum):
    TOFU = "tofu"
    STRICT = "strict"


class PinStoreIoError(Exception):
    pass


@dataclass
class ToolManifest:
    name: str
    description: str = ""
    input_schema: object = None

    @classmethod
    def from_dict(cls, d: dict) -> "ToolManifest":
        return cls(
            name=d.get("name", ""),
            description=d.get("description", ""),
            input_schema=d.get("inputSchema", d.get("input_schema")),
        )


@dataclass
class PinEntry:
    name: str
    digest: str  # 64 lowercase hex chars
    first_seen: int  # epoch ms


@dataclass
class GuardFinding:
    tool_name: str
    kind: FindingKind
    evidence: str
    action: GuardAction = GuardAction.BLOCK

    def to_dict(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "kind": self.kind.value,
            "evidence": self.evidence,
            "action": self.action.value,
        }


def pin_digest(manifest: ToolManifest) -> str:
    """SHA-256 of the canonical manifest serialization.

    Canonical form: sorted keys, no insignificant whitespace, fields
    (name, description, input_schema) — independent of input key order.
    """
    canonical = json.dumps(
        {
            "name": manifest.name,
            "description": manifest.description,
            "input_schema": manifest.input_schema,
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def analyze_description(
    manifest: ToolManifest, all_tool_names: Iterable[str]
) -> list:
    """Run the four poisoned-docstring heuristics on one manifest.

    H1 pseudo-tag markers, H2 sensitive-path references, H3 concealment
    phrases, H4 cross-tool shadowing (another registered tool mentioned
    near behavior-altering language).
    """
    text = manifest.description or ""
    findings: list = []

    m = POISON_TAG_RE.search(text)
    if m:
        findings.append(GuardFinding(manifest.name, FindingKind.POISON_TAG, m.group(0)))

    for pattern in SENSITIVE_PATH_RES.values():
        m = pattern.search(text)
        if m:
            findings.append(
                GuardFinding(manifest.name, FindingKind.SENSITIVE_PATH_REF, m.group(0))
            )

    m = CONCEALMENT_RE.search(text)
    if m:
        findings.append(
            GuardFinding(manifest.name, FindingKind.CONCEALMENT_PHRASE, m.group(0))
        )

    trigger_spans = [m.span() for m in SHADOWING_TRIGGER_RE.finditer(text)]
    if trigger_spans:
        for other in all_tool_names:
            if other == manifest.name:
                continue
            for m in re.finditer(re.escape(other), text):
                if any(
                    _span_gap(m.span(), span) <= SHADOWING_PROXIMITY_CHARS
                    for span in trigger_spans
                ):
                    findings.append(
                        GuardFinding(
                            manifest.name, FindingKind.CROSS_TOOL_SHADOWING, other
                        )
                    )
                    break

    return findings


def _span_gap(a: tuple, b: tuple) -> int:
    if a[1] <= b[0]:
        return b[0] - a[1]
    if b[1] <= a[0]:
        return a[0] - b[1]
    return 0  # overlapping


def damerau_levenshtein(a: str, b: str) -> int:
    """Edit distance with adjacent transpositions (optimal string
    alignment variant)."""
    la, lb = len(a), len(b)
    prev2: list = []
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if (
                i > 1
                and j > 1
                and a[i - 1] == b[j - 2]
                and a[i - 2] == b[j - 1]
            ):
                cur[j] = min(cur[j], prev2[j - 2] + 1)
        prev2, prev = prev, cur
    return prev[lb]


def _segments(name: str) -> list:
    return [s for s in re.split(r"[-_]", name) if s]


@dataclass(frozen=True)
class NameVerdict:
    status: str  # "trusted" | "typosquat_suspect" | "unknown"
    target: Optional[str] = None
    reason: Optional[str] = None


def check_name(name: str, trusted_registry: Iterable[str]) -> NameVerdict:
    """Flag names confusable with a trusted registry entry.

    Suspect iff edit distance to some trusted name is 1 or 2, or the
    names are segment permutations of each other (tavily-mcp vs
    mcp-tavily). An exact registry match is always Trusted.
    """
    registry = list(trusted_registry)
    if name in registry:
        return NameVerdict("trusted")
    for trusted in registry:
        distance = damerau_levenshtein(name, trusted)
        if 1 <= distance <= 2:
            return NameVerdict(
                "typosquat_suspect", target=trusted, reason=f"edit-distance-{distance}"
            )
        seg_a, seg_b = _segments(name), _segments(trusted)
        if seg_a != seg_b and sorted(seg_a) == sorted(seg_b):
            return NameVerdict(
                "typosquat_suspect", target=trusted, reason="segment-permutation"
            )
    return NameVerdict("unknown")


class PinStore:
    """Digest pins persisted as a JSON array. Single-writer: the gateway
    session serializes trust-on-first-use writes."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self._pins: dict[str, PinEntry] = {}
        self._lock = threading.Lock()
        if path and os.path.exists(path):
            try:
                with open(path, encoding="utf-8") as fh:
                    for entry in json.load(fh):
                        pin = PinEntry(
                            name=entry["name"],
                            digest=entry["digest"],
                            first_seen=entry.get("first_seen", 0),
                        )
                        self._pins[pin.name] = pin
            except (OSError, ValueError, KeyError) as exc:
                raise PinStoreIoError(str(exc)) from exc

    def _persist(self) -> None:
        if not self.path:
            return
        data = [
            {"name": p.name, "digest": p.digest, "first_seen": p.first_seen}
            for p in self._pins.values()
        ]
        try:
            tmp = self.path + ".tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(data, fh, indent=2)
            os.replace(tmp, self.path)
        except OSError as exc:
            raise PinStoreIoError(str(exc)) from exc

    def get(self, name: str) -> Optional[PinEntry]:
        return self._pins.get(name)

    def entries(self) -> list:
        return list(self._pins.values())

    def add(self, name: str, digest: str, now: int = 0) -> None:
        with self._lock:
            self._pins[name] = PinEntry(name=name, digest=digest, first_seen=now)
            self._persist()


def verify_pins(
    manifests: Iterable[ToolManifest],
    pins: PinStore,
    mode: PinMode = PinMode.TOFU,
    now: int = 0,
) -> dict:
    """Check each manifest against its stored pin.

    TOFU mode records a pin for previously unseen tools (verdict New);
    strict mode treats any unpinned tool as a mismatch.
    """
    verdicts: dict[str, PinVerdict] = {}
    for manifest in manifests:
        digest = pin_digest(manifest)
        pinned = pins.get(manifest.name)
        if pinned is None:
            if mode is PinMode.STRICT:
                verdicts[manifest.name] = PinVerdict.PIN_MISMATCH
            else:
                pins.add(manifest.name, digest, now=now)
                verdicts[manifest.name] = PinVerdict.NEW
        elif pinned.digest == digest:
            verdicts[manifest.name] = PinVerdict.OK
        else:
            verdicts[manifest.name] = PinVerdict.PIN_MISMATCH
    return verdicts


def manifests_from_tools_list(result: dict) -> list:
    tools = result.get("tools", []) if isinstance(result, dict) else []
    return [ToolManifest.from_dict(t) for t in tools if isinstance(t, dict)]


def filter_tools_list(result: dict, blocked_names: set) -> tuple:
    """Remove blocked tools from a tools/list result.

    Returns (filtered_result, removed_names). The result object is left
    untouched when nothing is removed.
    """
    tools = result.get("tools") if isinstance(result, dict) else None
    if not isinstance(tools, list):
        return result, []
    removed = [
        t.get("name")
        for t in tools
        if isinstance(t, dict) and t.get("name") in blocked_names
    ]
    if not removed:
        return result, []
    filtered = dict(result)
    filtered["tools"] = [
        t for t in tools if not (isinstance(t, dict) and t.get("name") in blocked_names)
    ]
    return filtered, removed
