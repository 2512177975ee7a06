"""Grammar compilation and matching.

A grammar is a flat sequence of quantified element constraints.  It is
compiled into a position (Glushkov) automaton: one start state plus one state
per element, meaning "the last token consumed was matched by that element".
The automaton has no epsilon transitions, so matching is a plain subset
simulation over token positions.

Tokens are duck-typed: anything with ``text``, ``l1_class`` and ``node_id``
attributes works.  A token with ``node_id`` of ``None`` is *plain*; literal
and L1-class constraints only ever match plain tokens, node constraints only
match instantiated ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import UnknownReference
from .kb.model import (
    Constraint,
    ConstraintType,
    GrammarSpec,
    KnowledgeBase,
    NodeKind,
    RESERVED_FEATURES,
)

Predicate = Callable[[object], bool]


def l1_prefix_match(l1_class: str | None, prefix: str) -> bool:
    """Dotted-segment prefix test: ``physobj`` matches ``physobj.anatomy``."""
    if not l1_class:
        return False
    return l1_class == prefix or l1_class.startswith(prefix + ".")


def compile_constraint(constraint: Constraint, kb: KnowledgeBase) -> Predicate:
    ctype = constraint.type
    if ctype in RESERVED_FEATURES:
        raise UnknownReference(f"lexical feature {ctype.value!r} is reserved and not computed")
    if ctype is ConstraintType.LITERAL:
        want = constraint.value.casefold()
        return lambda tok: tok.node_id is None and tok.text.casefold() == want
    if ctype is ConstraintType.L1:
        prefix = constraint.value
        return lambda tok: tok.node_id is None and l1_prefix_match(tok.l1_class, prefix)
    if ctype is ConstraintType.NODE:
        if constraint.value not in kb.nodes:
            raise UnknownReference(f"unknown node {constraint.value!r}")
        nid = constraint.value
        return lambda tok: tok.node_id == nid
    if ctype is ConstraintType.KIND:
        try:
            kind = NodeKind(constraint.value)
        except ValueError:
            raise UnknownReference(f"unknown node kind {constraint.value!r}") from None
        ids = frozenset(n.id for n in kb.nodes.values() if n.kind is kind)
        return lambda tok: tok.node_id in ids
    if ctype is ConstraintType.SUPERCLASS_OF:
        if constraint.value not in kb.nodes:
            raise UnknownReference(f"unknown node {constraint.value!r}")
        ids = frozenset(nid for nid in kb.nodes if kb.is_a(nid, constraint.value))
        return lambda tok: tok.node_id in ids
    if ctype is ConstraintType.ANY:
        preds = [compile_constraint(c, kb) for c in constraint.options]
        return lambda tok: any(p(tok) for p in preds)
    raise UnknownReference(f"unsupported constraint {ctype!r}")


@dataclass(frozen=True)
class MatchResult:
    token_range: tuple[int, int]
    bindings: dict[str, tuple[int, ...]]
    grammar_id: str

    @property
    def start(self) -> int:
        return self.token_range[0]

    @property
    def end(self) -> int:
        return self.token_range[1]

    def __len__(self) -> int:
        return self.end - self.start

    def key(self) -> tuple:
        return (self.token_range, tuple(sorted(self.bindings.items())), self.grammar_id)

    def to_dict(self) -> dict:
        return {
            "range": list(self.token_range),
            "bindings": {k: list(v) for k, v in sorted(self.bindings.items())},
            "grammar": self.grammar_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> MatchResult:
        return cls(
            token_range=tuple(d["range"]),
            bindings={k: tuple(v) for k, v in d["bindings"].items()},
            grammar_id=d["grammar"],
        )


@dataclass(frozen=True, eq=False)
class CompiledGrammar:
    """Position automaton for one grammar.

    State 0 is the start state; state ``j + 1`` is entered by consuming a
    token with element ``j``.  ``follow[s]`` lists the elements that may
    consume the next token from state ``s``.
    """

    grammar_id: str
    spec: GrammarSpec
    predicates: tuple[Predicate, ...]
    follow: tuple[tuple[int, ...], ...]
    accepting: frozenset[int]
    target_node_id: str | None = None
    warnings: tuple[str, ...] = field(default=())

    @property
    def num_states(self) -> int:
        return len(self.spec.elements) + 1

    @property
    def recursive(self) -> bool:
        return self.spec.recursive

    @property
    def anchor_index(self) -> int | None:
        return self.spec.anchor_index

    @property
    def accepts_empty(self) -> bool:
        return 0 in self.accepting

    @property
    def reach(self) -> int | None:
        """Maximum number of tokens one match can span, None if unbounded."""
        if any(m.quantifier.repeats for m in self.spec.elements):
            return None
        return len(self.spec.elements)

    def transitions(self) -> dict[int, list[tuple[int, int]]]:
        """``state -> [(element, next_state)]``; useful for inspection."""
        return {s: [(j, j + 1) for j in f] for s, f in enumerate(self.follow)}

    def _run(self, tokens: Sequence, start: int, anchor: int | None):
        """Yield ``(end, path)`` for every accepted prefix starting at ``start``.

        ``path`` gives the element index that consumed each token.  When
        several paths reach the same state only the lexicographically smallest
        survives, which makes earlier elements greedy.  With an anchor, only
        paths that cover it (with the anchor element, when one is marked)
        are reported.
        """
        anchor_elem = self.anchor_index
        # key: (state, anchor satisfied) -> path
        configs: dict[tuple[int, bool], tuple[int, ...]] = {(0, anchor is None): ()}
        if 0 in self.accepting and anchor is None:
            yield start, ()
        pos = start
        n = len(tokens)
        while configs and pos < n:
            tok = tokens[pos]
            nxt: dict[tuple[int, bool], tuple[int, ...]] = {}
            for (state, sat), path in configs.items():
                for j in self.follow[state]:
                    if not self.predicates[j](tok):
                        continue
                    new_sat = sat
                    if anchor is not None and pos == anchor:
                        new_sat = anchor_elem is None or j == anchor_elem
                    key = (j + 1, new_sat)
                    cand = path + (j,)
                    old = nxt.get(key)
                    if old is None or cand < old:
                        nxt[key] = cand
            pos += 1
            if anchor is not None and pos > anchor:
                nxt = {k: v for k, v in nxt.items() if k[1]}
            configs = nxt
            for (state, sat), path in sorted(configs.items(), key=lambda kv: kv[1]):
                if sat and state in self.accepting:
                    yield pos, path
                    break

    def _result(self, start: int, path: tuple[int, ...]) -> MatchResult:
        bindings: dict[str, list[int]] = {}
        for offset, j in enumerate(path):
            cap = self.spec.elements[j].capture
            if cap:
                bindings.setdefault(cap, []).append(start + offset)
        return MatchResult(
            token_range=(start, start + len(path)),
            bindings={k: tuple(v) for k, v in bindings.items()},
            grammar_id=self.grammar_id,
        )

    def longest_from(self, tokens: Sequence, start: int, *, allow_empty: bool = False):
        best = None
        for end, path in self._run(tokens, start, None):
            if end == start and not allow_empty:
                continue
            best = (end, path)
        if best is None:
            return None
        return self._result(start, best[1])


def compile_grammar(spec: GrammarSpec, kb: KnowledgeBase, target_node_id: str | None = None) -> CompiledGrammar:
    """Compile ``spec`` against ``kb`` into a position automaton.

    Raises ``UnknownReference`` if a constraint names a missing node, kind,
    or a reserved feature.
    """
    elements = spec.elements
    n = len(elements)
    preds = tuple(compile_constraint(m.constraint, kb) for m in elements)

    def run_from(i: int) -> list[int]:
        # elements i.. up to and including the first mandatory one
        out = []
        while i < n:
            out.append(i)
            if not elements[i].quantifier.nullable:
                break
            i += 1
        return out

    follow = [tuple(run_from(0))]
    for j in range(n):
        f = [j] if elements[j].quantifier.repeats else []
        f.extend(run_from(j + 1))
        follow.append(tuple(f))

    accepting = set()
    for state in range(n + 1):
        if all(m.quantifier.nullable for m in elements[state:]):
            accepting.add(state)

    warnings = ()
    if n == 0:
        warnings = (f"grammar {spec.id!r} has no elements and only accepts the empty range",)
    return CompiledGrammar(
        grammar_id=spec.id,
        spec=spec,
        predicates=preds,
        follow=tuple(follow),
        accepting=frozenset(accepting),
        target_node_id=target_node_id,
        warnings=warnings,
    )


def match_at(matcher: CompiledGrammar, tokens: Sequence, anchor: int) -> MatchResult | None:
    """Longest match whose anchor element (or any element, if none is
    marked) consumes ``tokens[anchor]``.  Ties go to the leftmost start."""
    if not 0 <= anchor < len(tokens):
        raise IndexError(f"anchor {anchor} out of range for {len(tokens)} tokens")
    best = None
    for start in range(anchor + 1):
        for end, path in matcher._run(tokens, start, anchor):
            if best is None or end - start > best[1] - best[0]:
                best = (start, end, path)
    if best is None:
        return None
    return matcher._result(best[0], best[2])


def match_floating(matcher: CompiledGrammar, tokens: Sequence) -> list[MatchResult]:
    """All non-overlapping leftmost-longest non-empty matches, left to right."""
    out = []
    i = 0
    while i < len(tokens):
        m = matcher.longest_from(tokens, i)
        if m is None:
            i += 1
        else:
            out.append(m)
            i = m.end
    return out
