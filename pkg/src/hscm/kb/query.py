"""The four HSCM query classes plus gen-spec traversal.

All functions are pure: they read the knowledge base and their arguments and
return fresh values.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from ..errors import IndexOutOfRange, NotInConflict, UnknownNode
from ..tokens import Hypothesis
from .model import (
    SENTINEL_CLASS,
    Constraint,
    ConstraintType,
    KnowledgeBase,
    NodeKind,
    OverlapCondition,
    SlotSpec,
    TriggerKind,
)


def superclass_chain(kb: KnowledgeBase, node_id: str) -> list[str]:
    """``node_id`` followed by its transitive superclasses, nearest first."""
    cached = kb._chains.get(node_id)
    if cached is not None:
        return list(cached)
    if node_id not in kb.nodes:
        raise UnknownNode(node_id)
    chain = [node_id]
    seen = {node_id}
    todo = deque([node_id])
    while todo:
        for sup in kb.direct_superclasses(todo.popleft()):
            if sup not in seen:
                seen.add(sup)
                chain.append(sup)
                todo.append(sup)
    kb._chains[node_id] = tuple(chain)
    return chain


# -- query 1: hypothesis retrieval -------------------------------------------

_KIND_ORDER = {TriggerKind.FLOATING: 0, TriggerKind.ANCHORED: 1, TriggerKind.CASCADING: 2}


def _trigger_predicates(kb: KnowledgeBase) -> dict:
    preds = kb.__dict__.get("_trigger_preds")
    if preds is None:
        from ..grammar import compile_constraint

        preds = {}
        for i, link in enumerate(kb.activation_links):
            if link.trigger is not None and link.trigger_kind is TriggerKind.ANCHORED:
                preds[i] = compile_constraint(link.trigger, kb)
        object.__setattr__(kb, "_trigger_preds", preds)
    return preds


def _context_ok(link, profile: frozenset[str]) -> bool:
    return all(item in profile for item in link.context_filter)


def _suppression_spans(kb: KnowledgeBase, target: str, tokens: Sequence) -> list[tuple[int, int]]:
    spans = []
    for sup in kb.suppression_patterns:
        if sup.target_node_id != target:
            continue
        matcher = kb.compiled.get(sup.pattern)
        if matcher is None:
            continue
        for start in range(len(tokens)):
            m = matcher.longest_from(tokens, start)
            if m is not None:
                spans.append(m.token_range)
    return spans


@dataclass(frozen=True)
class HypothesisSet:
    active: list[Hypothesis]
    suppressed: list[Hypothesis]
    specialized_away: list[Hypothesis]


def collect_hypotheses(
    kb: KnowledgeBase,
    tokens: Sequence,
    context: Iterable[str] = (),
    vetoed: Callable[[Hypothesis], bool] | None = None,
) -> HypothesisSet:
    """Query 1 with bookkeeping: also reports what suppression and
    specialization removed, for the parse trace.

    ``vetoed`` lets the caller suppress extra hypotheses (the parser uses it
    to keep a suppression in force after the pattern's words have been
    abstracted into nodes)."""
    profile = frozenset(context)
    index_of = {tok.id: i for i, tok in enumerate(tokens)}
    preds = _trigger_predicates(kb)
    supp_cache: dict[str, list[tuple[int, int]]] = {}

    def is_suppressed(h: Hypothesis) -> bool:
        if vetoed is not None and vetoed(h):
            return True
        spans = supp_cache.get(h.target_node_id)
        if spans is None:
            spans = supp_cache[h.target_node_id] = _suppression_spans(kb, h.target_node_id, tokens)
        if not spans:
            return False
        if not h.trigger_tokens:
            return True
        idx = [index_of[t] for t in h.trigger_tokens]
        return any(s <= i < e for s, e in spans for i in idx)

    found: dict[tuple, Hypothesis] = {}
    suppressed: list[Hypothesis] = []

    def add(h: Hypothesis) -> bool:
        if h.key() in found:
            return False
        if is_suppressed(h):
            suppressed.append(h)
            return False
        found[h.key()] = h
        return True

    for i, link in enumerate(kb.activation_links):
        if not _context_ok(link, profile):
            continue
        if link.trigger_kind is TriggerKind.FLOATING:
            add(Hypothesis(0, link.target_node_id, (), TriggerKind.FLOATING, link.prior))
        elif link.trigger_kind is TriggerKind.ANCHORED:
            pred = preds[i]
            for tok in tokens:
                if pred(tok):
                    add(Hypothesis(0, link.target_node_id, (tok.id,), TriggerKind.ANCHORED, link.prior))

    # a specialized node triggered by the same tokens replaces its superclass
    specialized_away = []
    by_triggers: dict[frozenset, list[str]] = {}
    for h in found.values():
        by_triggers.setdefault(frozenset(h.trigger_tokens), []).append(h.target_node_id)
    for key, h in list(found.items()):
        if not h.trigger_tokens:
            continue
        peers = by_triggers[frozenset(h.trigger_tokens)]
        if any(p != h.target_node_id and h.target_node_id in superclass_chain(kb, p)[1:] for p in peers):
            specialized_away.append(h)
            del found[key]

    frontier = list(found.values())
    cascading = [(j, link) for j, link in enumerate(kb.activation_links) if link.trigger_kind is TriggerKind.CASCADING]
    for _depth in range(kb.config.cascade_depth):
        nxt = []
        for h in frontier:
            for _j, link in cascading:
                if not _context_ok(link, profile):
                    continue
                if not kb.is_a(h.target_node_id, link.trigger.value):
                    continue
                cand = Hypothesis(0, link.target_node_id, h.trigger_tokens, TriggerKind.CASCADING, link.prior, h.target_node_id)
                if add(cand):
                    nxt.append(cand)
            for attr in kb.nodes[h.target_node_id].attribute_node_ids:
                cand = Hypothesis(0, attr, h.trigger_tokens, TriggerKind.CASCADING, 1.0, h.target_node_id)
                if add(cand):
                    nxt.append(cand)
        frontier = nxt
        if not frontier:
            break

    def order(h: Hypothesis):
        idx = sorted(index_of[t] for t in h.trigger_tokens)
        return (idx[0] if idx else -1, h.target_node_id, _KIND_ORDER[h.trigger_kind], idx)

    def numbered(hs):
        return [
            Hypothesis(i, h.target_node_id, h.trigger_tokens, h.trigger_kind, h.prior, h.cascaded_from)
            for i, h in enumerate(sorted(hs, key=order))
        ]

    return HypothesisSet(numbered(found.values()), numbered(suppressed), numbered(specialized_away))


def query_hypotheses(kb: KnowledgeBase, tokens: Sequence, context: Iterable[str] = ()) -> list[Hypothesis]:
    """Every plausible hypothesis for one level of tokens.

    Anchored links fire on each matching token, floating links always fire,
    and cascades follow node-triggered links and attribute lists up to
    ``config.cascade_depth`` steps.  Suppressed hypotheses are dropped.
    """
    return collect_hypotheses(kb, tokens, context).active


# -- query 2: unknown token assignment ---------------------------------------

def query_unknown_assignment(kb: KnowledgeBase, tokens: Sequence, index: int) -> list[tuple[str, int]]:
    if not 0 <= index < len(tokens):
        raise IndexOutOfRange(f"index {index} out of range for {len(tokens)} tokens")
    left = tokens[index - 1].l1_class if index > 0 else SENTINEL_CLASS
    right = tokens[index + 1].l1_class if index + 1 < len(tokens) else SENTINEL_CLASS
    model = kb.sequence_model
    scored = []
    for cls in model.classes():
        score = model.count(left, cls) * model.count(cls, right)
        if score > 0:
            scored.append((cls, score))
    scored.sort(key=lambda cs: (-cs[1], cs[0]))
    return scored


# -- query 3: precedence -----------------------------------------------------

class Precedence(str, Enum):
    PREFER_A = "prefer_a"
    PREFER_B = "prefer_b"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class Candidate:
    """A located hypothesis instance: node plus half-open token range."""

    node_id: str
    start: int
    end: int
    trigger: int
    prior: float = 1.0

    def __len__(self) -> int:
        return self.end - self.start


def overlap_kind(a: Candidate, b: Candidate) -> OverlapCondition | None:
    if a.end <= b.start or b.end <= a.start:
        return None
    a_in_b = b.start <= a.start and a.end <= b.end
    b_in_a = a.start <= b.start and b.end <= a.end
    return OverlapCondition.FULL if a_in_b or b_in_a else OverlapCondition.PARTIAL


def _side_matches(kb: KnowledgeBase, side: str, node_id: str) -> bool:
    if side == node_id:
        return True
    node = kb.nodes.get(node_id)
    return node is not None and node.kind.value == side


def compare(kb: KnowledgeBase, a: Candidate, b: Candidate) -> tuple[Precedence, str]:
    """Precedence verdict plus a short description of the deciding step."""
    overlap = overlap_kind(a, b)
    if overlap is None:
        raise NotInConflict(f"{a.node_id}{(a.start, a.end)} and {b.node_id}{(b.start, b.end)} do not overlap")
    for rule in kb.precedence_rules:
        if rule.condition is not OverlapCondition.ALWAYS and rule.condition is not overlap:
            continue
        basis = f"precedence rule {rule.winner} > {rule.loser} ({rule.condition.value})"
        if _side_matches(kb, rule.winner, a.node_id) and _side_matches(kb, rule.loser, b.node_id):
            return Precedence.PREFER_A, basis
        if _side_matches(kb, rule.winner, b.node_id) and _side_matches(kb, rule.loser, a.node_id):
            return Precedence.PREFER_B, basis
    if len(a) != len(b):
        return (Precedence.PREFER_A if len(a) > len(b) else Precedence.PREFER_B), "longer token span"
    la, lb = kb.node(a.node_id).layer, kb.node(b.node_id).layer
    if la != lb:
        return (Precedence.PREFER_A if la > lb else Precedence.PREFER_B), "higher layer"
    if a.trigger != b.trigger:
        return (Precedence.PREFER_A if a.trigger < b.trigger else Precedence.PREFER_B), "leftmost trigger"
    return Precedence.UNRESOLVED, "identical span, layer and trigger"


def query_precedence(kb: KnowledgeBase, a: Candidate, b: Candidate) -> Precedence:
    """Decide between two conflicting instances: explicit rule, then longer
    span, then higher layer, then leftmost trigger."""
    return compare(kb, a, b)[0]


# -- query 4: compatibility --------------------------------------------------

def _node_and_class(kb: KnowledgeBase, thing) -> tuple[str | None, str | None]:
    if isinstance(thing, str):
        if thing not in kb.nodes:
            raise UnknownNode(thing)
        return thing, None
    return getattr(thing, "node_id", None), getattr(thing, "l1_class", None)


def admits(kb: KnowledgeBase, acceptor: Constraint, node_id: str | None, l1_class: str | None) -> bool:
    from ..grammar import l1_prefix_match

    t = acceptor.type
    if t in (ConstraintType.NODE, ConstraintType.SUPERCLASS_OF):
        return node_id is not None and kb.is_a(node_id, acceptor.value)
    if t is ConstraintType.KIND:
        return node_id is not None and kb.nodes[node_id].kind.value == acceptor.value
    if t is ConstraintType.L1:
        return l1_prefix_match(l1_class, acceptor.value)
    if t is ConstraintType.LITERAL:
        return False
    if t is ConstraintType.ANY:
        return any(admits(kb, o, node_id, l1_class) for o in acceptor.options)
    return False


def slot_admits(kb: KnowledgeBase, slot: SlotSpec, thing) -> bool:
    node_id, l1 = _node_and_class(kb, thing)
    return any(admits(kb, acc, node_id, l1) for acc in slot.accepted)


def query_compatibility(kb: KnowledgeBase, orphan, anchor) -> str | None:
    """First slot of ``anchor`` (declaration order) that could hold ``orphan``.

    Both arguments may be tokens (anything with ``node_id`` / ``l1_class``)
    or bare node ids.
    """
    anchor_id, _ = _node_and_class(kb, anchor)
    if anchor_id is None:
        return None
    node = kb.node(anchor_id)
    if node.kind is NodeKind.PRIMITIVE:
        return None
    for slot in node.slots:
        if slot_admits(kb, slot, orphan):
            return slot.name
    return None
