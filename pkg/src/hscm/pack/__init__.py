"""The bundled thoracic-radiology knowledge base and its golden fixtures.

Golden expectations are structural subsets of a parse trace: a dict matches
when every expected key matches, a list matches when every expected item
matches some actual item, and scalars compare equal.  KB refinements that
add detail therefore don't break unrelated fixtures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from ..kb.loader import load_kb
from ..kb.model import KnowledgeBase
from ..trace import ParseTrace

PACK_VERSION = "v1"
_DATA = ("data", "radiology", PACK_VERSION)

_cache: dict[str, KnowledgeBase] = {}


def _data_dir():
    root = resources.files(__name__)
    for part in _DATA:
        root = root / part
    return root


def kb_path():
    """Location of the bundled ``kb.json`` (a Traversable)."""
    return _data_dir() / "kb.json"


def pack_contents() -> KnowledgeBase:
    """Load (once) and return the validated radiology knowledge base."""
    kb = _cache.get("kb")
    if kb is None:
        kb = _cache["kb"] = load_kb(kb_path().read_bytes())
    return kb


@dataclass(frozen=True)
class GoldenCase:
    name: str
    sentence: str
    expected: dict
    context: tuple[str, ...] = field(default=())


def golden_cases() -> list[GoldenCase]:
    cases = []
    for entry in sorted(_data_dir().joinpath("golden").iterdir(), key=lambda p: p.name):
        if not entry.name.endswith(".json"):
            continue
        doc = json.loads(entry.read_text(encoding="utf-8"))
        cases.append(GoldenCase(doc["name"], doc["sentence"], doc["expected"], tuple(doc.get("context", ()))))
    return cases


def is_subset(expected, actual) -> bool:
    if isinstance(expected, dict):
        return isinstance(actual, dict) and all(k in actual and is_subset(v, actual[k]) for k, v in expected.items())
    if isinstance(expected, list):
        return isinstance(actual, list) and all(any(is_subset(e, a) for a in actual) for e in expected)
    return expected == actual


def _nodes_seen(trace: ParseTrace) -> set[str]:
    seen = set()
    for rec in trace.levels:
        seen.update(h.target_node_id for h in rec.hypotheses)
        seen.update(d.node_id for d in rec.decisions)
        seen.update(t.node_id for t in rec.output if t.node_id)
    return seen


def check_golden(case: GoldenCase, trace: ParseTrace) -> list[str]:
    """Return a list of mismatch descriptions; empty means the case passes."""
    exp = case.expected
    problems = []

    def check(label, want, got):
        if not is_subset(want, got):
            problems.append(f"{case.name}: {label}: expected {want!r}, got {got!r}")

    if "l0_count" in exp:
        check("l0_count", exp["l0_count"], len(trace.surface))
    if "functional" in exp:
        got = [[f.text, f.l1_class, f.pos] for f in trace.functional]
        if exp["functional"] != got:
            problems.append(f"{case.name}: functional: expected {exp['functional']!r}, got {got!r}")
    if "level_input_counts" in exp:
        for level, count in exp["level_input_counts"].items():
            rec = trace.level(int(level))
            check(f"level {level} input", count, len(rec.input) if rec else None)
    if "level_count" in exp:
        check("level_count", exp["level_count"], len(trace.levels))
    if "final_token_count" in exp:
        check("final_token_count", exp["final_token_count"], len(trace.final_tokens))
    if "frame_nodes" in exp:
        got = [f["node"] for f in trace.frames]
        if exp["frame_nodes"] != got:
            problems.append(f"{case.name}: frame_nodes: expected {exp['frame_nodes']!r}, got {got!r}")
    if "frames" in exp:
        check("frames", exp["frames"], list(trace.frames))
    if "residuals" in exp:
        check("residuals", exp["residuals"], list(trace.residuals))
    if "decisions" in exp:
        got = [dict(d.to_dict(), level=rec.level) for rec in trace.levels for d in rec.decisions]
        for want in exp["decisions"]:
            want = dict(want)
            fragment = want.pop("reason_contains", None)
            hits = [d for d in got if is_subset(want, d) and (fragment is None or fragment in d["reason"])]
            if not hits:
                problems.append(f"{case.name}: no decision matching {want!r} (reason containing {fragment!r})")
    if "absent_nodes" in exp:
        seen = _nodes_seen(trace)
        for nid in exp["absent_nodes"]:
            if nid in seen:
                problems.append(f"{case.name}: node {nid} should not appear in the trace")
    return problems
