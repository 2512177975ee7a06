"""The predictive-coding parse loop.

Each level runs four steps over the current token sequence:

1. generate hypotheses from the activation network,
2. test every hypothesis independently against its node grammar,
3. adjudicate the successful matches globally,
4. build the next token sequence (accepted matches collapse into one token,
   everything else percolates up unchanged as a residual).

Levels repeat until a level accepts nothing or ``config.max_levels`` is hit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import KBInvalid
from .grammar import MatchResult, match_at, match_floating
from .kb.model import Cardinality, KnowledgeBase, NodeKind, TriggerKind
from .kb.query import Candidate, Precedence, collect_hypotheses, compare, query_compatibility, slot_admits
from .kb.validate import validate_kb
from .preprocess import preprocess
from .tokens import Hypothesis, NodeInstance, Token
from .trace import Decision, LevelRecord, ParseTrace, TestReport

FIRST_PARSE_LEVEL = 2

AgentOrder = Callable[[list[Hypothesis]], Iterable[Hypothesis]]


@dataclass
class ParseState:
    """Mutable bookkeeping owned by one ``parse`` call."""

    tokens: list[Token]
    context: tuple[str, ...] = ()
    level: int = FIRST_PARSE_LEVEL
    registry: dict[int, Token] = field(default_factory=dict)
    failed: set = field(default_factory=set)
    # (target, trigger char spans) of suppressed anchored hypotheses; the
    # veto outlives the words of the pattern being abstracted into nodes
    vetoed: set = field(default_factory=set)
    next_id: int = 0

    def __post_init__(self):
        for t in self.tokens:
            self.registry.setdefault(t.id, t)
        if self.registry:
            self.next_id = max(self.next_id, max(self.registry) + 1)


@dataclass(frozen=True)
class Instantiation:
    node_id: str
    match: MatchResult


@dataclass(frozen=True)
class Adjudication:
    accepted: list[Instantiation]
    rejected: list[Instantiation]
    unresolved: list[Instantiation]
    decisions: list[Decision]


# -- generate -----------------------------------------------------------------

def generate(kb: KnowledgeBase, tokens: Sequence[Token], context: Iterable[str] = ()) -> list[Hypothesis]:
    """Hypotheses for one level, deduplicated by (target, trigger tokens) and
    ordered by leftmost trigger then target id."""
    return collect_hypotheses(kb, tokens, context).active


def _reactivation_key(kb: KnowledgeBase, h: Hypothesis, tokens: Sequence[Token], index_of: dict[int, int]):
    grammar = kb.grammar_for(h.target_node_id)
    reach = None
    if grammar is not None and grammar.id in kb.compiled and h.trigger_kind is TriggerKind.ANCHORED:
        reach = kb.compiled[grammar.id].reach
    if reach is None or not h.trigger_tokens:
        lo, hi = 0, len(tokens)
    else:
        idx = [index_of[t] for t in h.trigger_tokens]
        lo, hi = max(0, min(idx) - reach), min(len(tokens), max(idx) + reach + 1)
    window = tuple((t.char_span, t.node_id) for t in tokens[lo:hi])
    triggers = tuple(sorted((tokens[index_of[t]].char_span, tokens[index_of[t]].node_id) for t in h.trigger_tokens))
    return (h.target_node_id, h.trigger_kind.value, triggers, window)


def _veto_key(h: Hypothesis, tokens: Sequence[Token], index_of: dict[int, int]):
    return (h.target_node_id, tuple(sorted(tokens[index_of[t]].char_span for t in h.trigger_tokens)))


# -- test -------------------------------------------------------------------

def _nesting(node_id: str, token: Token, registry: dict[int, Token], memo: dict) -> int:
    key = (node_id, token.id)
    if key in memo:
        return memo[key]
    if token.node_id != node_id:
        depth = 0
    elif token.residual:
        depth = _nesting(node_id, registry[token.children[0]], registry, memo)
    else:
        depth = 1 + max(
            (_nesting(node_id, registry[c], registry, memo) for c in token.children if c in registry),
            default=0,
        )
    memo[key] = depth
    return depth


def test(kb: KnowledgeBase, hypothesis: Hypothesis, tokens: Sequence[Token], registry: dict[int, Token] | None = None) -> TestReport:
    """Run one hypothesis-testing agent.  Side-effect free.

    Anchored hypotheses are matched at each trigger token; floating ones scan
    the whole level, and cascaded ones keep only scanned matches that cover
    one of their triggers.  Matches are then checked against the
    target node: no single-token rewrap of the same node, mandatory slots
    bound, fillers admitted by their slot, and recursion depth bounded.
    """
    target = hypothesis.target_node_id
    node = kb.node(target)
    grammar = kb.grammar_for(target)
    if grammar is None:
        return TestReport(hypothesis.id, target, False, (), f"missing grammar: {target} and its superclasses have none")
    matcher = kb.compiled.get(grammar.id)
    if matcher is None:
        return TestReport(hypothesis.id, target, False, (), f"grammar {grammar.id} failed to compile", grammar.id)

    if hypothesis.trigger_kind is TriggerKind.ANCHORED:
        index_of = {t.id: i for i, t in enumerate(tokens)}
        raw = []
        for tid in hypothesis.trigger_tokens:
            m = match_at(matcher, tokens, index_of[tid])
            if m is not None:
                raw.append(m)
        no_match = "no match at anchor"
    elif hypothesis.trigger_kind is TriggerKind.CASCADING and hypothesis.trigger_tokens:
        # cascaded evidence is local: a match must cover one of its triggers
        index_of = {t.id: i for i, t in enumerate(tokens)}
        idx = [index_of[t] for t in hypothesis.trigger_tokens if t in index_of]
        raw = [m for m in match_floating(matcher, tokens) if any(m.start <= i < m.end for i in idx)]
        no_match = "no match covering a trigger"
    else:
        raw = match_floating(matcher, tokens)
        no_match = "no match in level"
    if not raw:
        return TestReport(hypothesis.id, target, False, (), no_match, grammar.id)

    registry = registry if registry is not None else {t.id: t for t in tokens}
    memo: dict = {}
    kept, reasons, seen = [], [], set()
    for m in raw:
        if m.key() in seen:
            continue
        seen.add(m.key())
        reason = _check_instance(kb, node, m, tokens, registry, memo, matcher.recursive)
        if reason is None:
            kept.append(m)
        else:
            reasons.append(reason)
    if not kept:
        return TestReport(hypothesis.id, target, False, (), reasons[0], grammar.id)
    return TestReport(hypothesis.id, target, True, tuple(kept), None, grammar.id)


test.__test__ = False  # keep pytest from collecting it when imported


def _check_instance(kb, node, m: MatchResult, tokens, registry, memo, recursive: bool) -> str | None:
    span = tokens[m.start:m.end]
    if len(span) == 0:
        return "empty match"
    if len(span) == 1 and span[0].node_id is not None and kb.is_a(span[0].node_id, node.id):
        return f"token already instantiates {node.id}"
    for slot in node.slots:
        filled = m.bindings.get(slot.name, ())
        if slot.mandatory and not filled:
            return f"mandatory slot {slot.name!r} unbound"
        if slot.cardinality is not Cardinality.MANY and len(filled) > 1:
            return f"slot {slot.name!r} takes a single filler"
        for i in filled:
            if not slot_admits(kb, slot, tokens[i]):
                return f"slot {slot.name!r} does not accept {tokens[i].node_id or tokens[i].l1_class}"
    if recursive:
        depth = 1 + max((_nesting(node.id, t, registry, memo) for t in span), default=0)
        if depth > kb.config.max_recursion_depth:
            return f"recursion depth {depth} exceeds {kb.config.max_recursion_depth}"
    return None


# -- adjudicate -----------------------------------------------------------

def _specialization(kb: KnowledgeBase, a: Candidate, b: Candidate):
    """On an identical span a subclass instance supersedes its superclass."""
    if (a.start, a.end) != (b.start, b.end) or a.node_id == b.node_id:
        return None
    if kb.is_a(a.node_id, b.node_id):
        return Precedence.PREFER_A, f"specialization of {b.node_id}"
    if kb.is_a(b.node_id, a.node_id):
        return Precedence.PREFER_B, f"specialization of {a.node_id}"
    return None


def adjudicate(kb: KnowledgeBase, reports: Sequence[TestReport], hypotheses: Sequence[Hypothesis] = (), tokens: Sequence[Token] = ()) -> Adjudication:
    """Select a pairwise non-conflicting set of matches.

    A subclass match supersedes a superclass match on the same span.
    Matches that tie on every precedence step (and on prior) are unresolved
    and dropped together.  Among the rest, a match is accepted once no
    remaining conflicting match beats it; whatever it overlaps is rejected.
    For an acyclic precedence relation this yields the unique independent,
    absorbing set (every rejected match is beaten by an accepted neighbour),
    regardless of the order reports arrive in.
    """
    hyp_by_id = {h.id: h for h in hypotheses}
    index_of = {t.id: i for i, t in enumerate(tokens)}

    merged: dict[tuple, dict] = {}
    for report in sorted(reports, key=lambda r: r.hypothesis_id):
        if not report.success:
            continue
        h = hyp_by_id.get(report.hypothesis_id)
        for m in report.matches:
            key = (report.target_node_id, m.key())
            entry = merged.setdefault(key, {"node": report.target_node_id, "match": m, "hyps": [], "prior": 0.0, "trigger": None})
            entry["hyps"].append(report.hypothesis_id)
            prior = h.prior if h else 1.0
            entry["prior"] = max(entry["prior"], prior)
            trig = m.start
            if h is not None and h.trigger_tokens and h.trigger_kind is TriggerKind.ANCHORED:
                idx = [index_of[t] for t in h.trigger_tokens if t in index_of]
                inside = [i for i in idx if m.start <= i < m.end]
                if inside:
                    trig = min(inside)
            entry["trigger"] = trig if entry["trigger"] is None else min(entry["trigger"], trig)

    items = sorted(merged.values(), key=lambda e: (e["match"].start, -len(e["match"]), e["node"], e["match"].key()))
    cands = [Candidate(e["node"], e["match"].start, e["match"].end, e["trigger"], e["prior"]) for e in items]
    n = len(cands)

    # beats[i][j]: i wins against conflicting j (with the basis string)
    verdicts: dict[tuple[int, int], tuple[int | None, str]] = {}
    conflicts: list[set[int]] = [set() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = cands[i], cands[j]
            if a.end <= b.start or b.end <= a.start:
                continue
            conflicts[i].add(j)
            conflicts[j].add(i)
            verdict, basis = _specialization(kb, a, b) or compare(kb, a, b)
            if verdict is Precedence.UNRESOLVED and a.prior != b.prior:
                verdict = Precedence.PREFER_A if a.prior > b.prior else Precedence.PREFER_B
                basis = "higher prior"
            winner = {Precedence.PREFER_A: i, Precedence.PREFER_B: j}.get(verdict)
            verdicts[(i, j)] = verdicts[(j, i)] = (winner, basis)

    status: dict[int, tuple[str, str, int | None]] = {}
    for (i, j), (winner, basis) in sorted(verdicts.items()):
        if winner is None and i < j:
            for x, y in ((i, j), (j, i)):
                if x not in status:
                    status[x] = ("unresolved", f"same-span ambiguity with {cands[y].node_id}: {basis}", y)

    remaining = [i for i in range(n) if i not in status]
    while remaining:
        rem = set(remaining)

        def beaten(i: int) -> bool:
            return any(verdicts[(i, j)][0] == j for j in conflicts[i] if j in rem)

        eligible = [i for i in remaining if not beaten(i)]
        if not eligible:
            for i in remaining:
                status[i] = ("unresolved", "precedence cycle among conflicting matches", None)
            break
        for i in eligible:
            status[i] = ("accepted", "no conflict" if not conflicts[i] else "preferred over all conflicting matches", None)
        for i in eligible:
            for j in sorted(conflicts[i]):
                if j in rem and j not in status:
                    basis = verdicts[(i, j)][1]
                    m = cands[i]
                    status[j] = ("rejected", f"conflicts with accepted {m.node_id}[{m.start},{m.end}) by {basis}", i)
        remaining = [i for i in remaining if i not in status]

    decisions, accepted, rejected, unresolved = [], [], [], []
    for i, e in enumerate(items):
        st, reason, against = status[i]
        inst = Instantiation(e["node"], e["match"])
        decisions.append(Decision(i, e["node"], e["match"], tuple(e["hyps"]), st, reason, against))
        {"accepted": accepted, "rejected": rejected, "unresolved": unresolved}[st].append(inst)
    return Adjudication(accepted, rejected, unresolved, decisions)


# -- build_next -----------------------------------------------------------

def build_next(kb: KnowledgeBase, tokens: Sequence[Token], accepted: Sequence[Instantiation], *, level: int, first_id: int) -> list[Token]:
    """Collapse each accepted match into one token; percolate the rest."""
    by_start = {inst.match.start: inst for inst in accepted}
    out = []
    next_id = first_id
    i = 0
    while i < len(tokens):
        inst = by_start.get(i)
        if inst is None:
            t = tokens[i]
            out.append(Token(next_id, level, t.char_span, t.text, t.l1_class, t.pos, t.node_instance, (t.id,), True))
            i += 1
        else:
            span = tokens[inst.match.start:inst.match.end]
            node = kb.node(inst.node_id)
            slots: dict[str, list[int]] = {}
            # recursion: an instance of the same node passes its fillers on
            for t in span:
                if t.node_instance is not None and t.node_id == inst.node_id:
                    for name, ids in t.node_instance.slots.items():
                        slots.setdefault(name, []).extend(ids)
            for name, idxs in inst.match.bindings.items():
                slot = node.slot(name)
                if slot is None:
                    continue
                ids = [tokens[k].id for k in idxs]
                if slot.cardinality is Cardinality.MANY:
                    slots.setdefault(name, []).extend(ids)
                else:
                    slots[name] = ids
            single = span[0] if len(span) == 1 else None
            out.append(
                Token(
                    id=next_id,
                    level=level,
                    char_span=(span[0].char_span[0], span[-1].char_span[1]),
                    text=single.text if single else " ".join(t.text for t in span),
                    l1_class=single.l1_class if single else None,
                    pos=single.pos if single else None,
                    node_instance=NodeInstance(inst.node_id, {k: tuple(v) for k, v in slots.items()}),
                    children=tuple(t.id for t in span),
                    residual=False,
                )
            )
            i = inst.match.end
        next_id += 1
    return out


# -- level manager ------------------------------------------------------

def run_level(kb: KnowledgeBase, state: ParseState, *, agent_order: AgentOrder | None = None, executor=None) -> tuple[list[Token], LevelRecord]:
    """One level manager pass: generate, test, adjudicate, build_next."""
    tokens = state.tokens
    index_of = {t.id: i for i, t in enumerate(tokens)}
    found = collect_hypotheses(kb, tokens, state.context, lambda h: _veto_key(h, tokens, index_of) in state.vetoed)
    for h in found.suppressed:
        if h.trigger_tokens:
            state.vetoed.add(_veto_key(h, tokens, index_of))

    to_test, skipped, keys = [], [], {}
    for h in found.active:
        key = _reactivation_key(kb, h, tokens, index_of)
        if key in state.failed:
            skipped.append(h)
        else:
            to_test.append(h)
            keys[h.id] = key

    order = list(agent_order(list(to_test))) if agent_order else to_test
    if executor is not None:
        reports = list(executor.map(lambda h: test(kb, h, tokens, state.registry), order))
    else:
        reports = [test(kb, h, tokens, state.registry) for h in order]
    reports.sort(key=lambda r: r.hypothesis_id)
    for r in reports:
        if not r.success:
            state.failed.add(keys[r.hypothesis_id])

    result = adjudicate(kb, reports, found.active, tokens)
    fixed = not result.accepted
    nxt = build_next(kb, tokens, result.accepted, level=state.level, first_id=state.next_id)
    for t in nxt:
        state.registry[t.id] = t
    state.next_id += len(nxt)

    record = LevelRecord(
        level=state.level,
        input=tuple(tokens),
        hypotheses=tuple(found.active),
        reports=tuple(reports),
        decisions=tuple(result.decisions),
        output=tuple(nxt),
        fixed_point=fixed,
        suppressed=tuple(found.suppressed),
        specialized=tuple(found.specialized_away),
        skipped=tuple(skipped),
    )
    state.tokens = nxt
    state.level += 1
    return nxt, record


# -- parse --------------------------------------------------------------

def _ensure_valid(kb: KnowledgeBase) -> None:
    ok = kb.__dict__.get("_parse_ok")
    if ok is None:
        report = validate_kb(kb)
        if report.errors:
            raise KBInvalid(report)
        object.__setattr__(kb, "_parse_ok", True)


def _render(kb: KnowledgeBase, token: Token, registry: dict[int, Token]) -> dict:
    out = {"token": token.id, "text": token.text, "span": list(token.char_span)}
    if token.node_instance is None:
        out["l1_class"] = token.l1_class
        return out
    node = kb.node(token.node_id)
    out["node"] = node.id
    out["kind"] = node.kind.value
    slots = {}
    for name, ids in sorted(token.node_instance.slots.items()):
        values = [_render(kb, registry[i], registry) for i in ids]
        slot = node.slot(name)
        if slot is not None and slot.cardinality is Cardinality.MANY:
            slots[name] = values
        else:
            slots[name] = values[-1] if values else None
    out["slots"] = slots
    return out


_FRAME_KINDS = (NodeKind.PROPOSITION, NodeKind.FRAME, NodeKind.DISCOURSE)


def parse(
    kb: KnowledgeBase,
    sentence,
    context: Iterable[str] = (),
    *,
    agent_order: AgentOrder | None = None,
    executor=None,
) -> ParseTrace:
    """Parse one sentence into frames, returning the full level-by-level trace.

    ``agent_order`` may permute the hypothesis-testing agents and
    ``executor`` (a ``concurrent.futures`` executor) may run them
    concurrently; neither changes the result.
    """
    _ensure_valid(kb)
    context = tuple(context)
    surface, functional = preprocess(kb, sentence)
    text = sentence.decode("utf-8") if isinstance(sentence, (bytes, bytearray)) else sentence
    tokens = [Token(i, 1, f.span, f.text, f.l1_class, f.pos) for i, f in enumerate(functional)]
    state = ParseState(tokens, context)

    levels = []
    while state.tokens and len(levels) < kb.config.max_levels:
        _, record = run_level(kb, state, agent_order=agent_order, executor=executor)
        levels.append(record)
        if record.fixed_point:
            break

    final = state.tokens
    frames, residual_tokens = [], []
    for t in final:
        if t.node_id is not None and kb.node(t.node_id).kind in _FRAME_KINDS:
            frames.append(t)
        else:
            residual_tokens.append(t)
    residuals = []
    for t in residual_tokens:
        entry = _render(kb, t, state.registry)
        entry["attachments"] = [
            {"anchor_token": f.id, "anchor_node": f.node_id, "slot": slot}
            for f in frames
            if (slot := query_compatibility(kb, t, f)) is not None
        ]
        residuals.append(entry)

    return ParseTrace(
        sentence=text,
        context=context,
        surface=tuple(surface),
        functional=tuple(functional),
        levels=tuple(levels),
        frames=tuple(_render(kb, t, state.registry) for t in frames),
        residuals=tuple(residuals),
        final_tokens=tuple(final),
    )
