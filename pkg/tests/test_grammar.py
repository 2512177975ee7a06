from dataclasses import dataclass

import pytest
from hypothesis import given, settings, strategies as st

from hscm.errors import UnknownReference
from hscm.grammar import compile_grammar, l1_prefix_match, match_at, match_floating
from hscm.kb.model import Constraint, ConstraintType, GrammarSpec, Matcher, Quantifier
from hscm.tokens import NodeInstance, Token


@dataclass(frozen=True)
class T:
    text: str
    l1_class: str | None = None
    node_id: str | None = None


def lit(word, q=Quantifier.ONE, cap=None, anchor=False):
    return Matcher(Constraint(ConstraintType.LITERAL, word), q, cap, anchor)


def toks(s):
    return [T(c) for c in s]


# -- brute-force oracle ---------------------------------------------------------
# Enumerate every assignment of tokens to element indices (non-decreasing,
# each element used within its quantifier bounds) instead of simulating an
# automaton.

def paths(elements, words):
    n = len(elements)

    def rec(pos, elem, used, acc):
        if pos == len(words):
            # remaining elements (after the current one) must all be nullable
            ok = all(e.quantifier.nullable for e in elements[elem + 1:])
            if used == 0 and not elements[elem].quantifier.nullable:
                ok = False
            if ok:
                yield tuple(acc)
            return
        for j in range(elem, n):
            if j > elem:
                # skipping elements elem+1..j-1 and leaving elem with `used`
                if used == 0 and not elements[elem].quantifier.nullable:
                    break
                if any(not elements[k].quantifier.nullable for k in range(elem + 1, j)):
                    break
                count = 0
            else:
                count = used
            if count >= 1 and not elements[j].quantifier.repeats:
                continue
            if elements[j].constraint.value == words[pos]:
                yield from rec(pos + 1, j, count + 1, acc + [j])

    if n == 0:
        if not words:
            yield ()
        return
    yield from rec(0, 0, 0, [])


def oracle_longest_at(elements, words, anchor):
    anchor_elem = next((j for j, e in enumerate(elements) if e.anchor), None)
    best = None
    for start in range(anchor + 1):
        for end in range(anchor + 1, len(words) + 1):
            ok = [p for p in paths(elements, words[start:end])
                  if anchor_elem is None or p[anchor - start] == anchor_elem]
            if ok and (best is None or end - start > best[1] - best[0]):
                best = (start, end, min(ok))
    return best


def bindings_of(elements, start, path):
    out = {}
    for off, j in enumerate(path):
        if elements[j].capture:
            out.setdefault(elements[j].capture, []).append(start + off)
    return {k: tuple(v) for k, v in out.items()}


quantifiers = st.sampled_from(list(Quantifier))
element = st.builds(
    lambda w, q, c: lit(w, q, c),
    st.sampled_from("abc"), quantifiers, st.sampled_from([None, "x", "y"]),
)


@st.composite
def grammar_and_words(draw):
    elements = draw(st.lists(element, min_size=1, max_size=3))
    if draw(st.booleans()):
        mandatory = [i for i, e in enumerate(elements) if not e.quantifier.nullable]
        if mandatory:
            k = draw(st.sampled_from(mandatory))
            e = elements[k]
            elements[k] = Matcher(e.constraint, e.quantifier, e.capture, True)
    words = draw(st.text(alphabet="abc", min_size=1, max_size=6))
    return tuple(elements), words


def compiled(elements, gid="g"):
    return compile_grammar(GrammarSpec(gid, tuple(elements)), kb=None)


@settings(max_examples=400, deadline=None)
@given(grammar_and_words(), st.data())
def test_match_at_agrees_with_brute_force(gw, data):
    elements, words = gw
    anchor = data.draw(st.integers(0, len(words) - 1))
    got = match_at(compiled(elements), toks(words), anchor)
    want = oracle_longest_at(elements, words, anchor)
    if want is None:
        assert got is None
    else:
        start, end, path = want
        assert got is not None and got.token_range == (start, end)
        assert got.bindings == bindings_of(elements, start, path)


@settings(max_examples=300, deadline=None)
@given(grammar_and_words())
def test_accepting_states_agree_with_brute_force(gw):
    elements, words = gw
    m = compiled(elements)
    for end in range(1, len(words) + 1):
        runs = dict(m._run(toks(words), 0, None))
        assert (end in runs) == any(True for _ in paths(elements, words[:end]))


@settings(max_examples=300, deadline=None)
@given(grammar_and_words())
def test_floating_is_leftmost_longest_non_overlapping(gw):
    elements, words = gw
    got = [m.token_range for m in match_floating(compiled(elements), toks(words))]
    want, i = [], 0
    while i < len(words):
        ends = [e for e in range(i + 1, len(words) + 1) if any(True for _ in paths(elements, words[i:e]))]
        if ends:
            want.append((i, max(ends)))
            i = max(ends)
        else:
            i += 1
    assert got == want


# -- automaton shape ----------------------------------------------------------------

def test_state_count_and_transitions():
    m = compiled([lit("a", Quantifier.OPTIONAL), lit("b", Quantifier.PLUS)])
    assert m.num_states == 3
    assert m.transitions() == {0: [(0, 1), (1, 2)], 1: [(1, 2)], 2: [(1, 2)]}
    assert m.accepting == {2}
    assert not m.accepts_empty


def test_reach():
    assert compiled([lit("a"), lit("b", Quantifier.OPTIONAL)]).reach == 2
    assert compiled([lit("a", Quantifier.STAR)]).reach is None


def test_empty_grammar():
    m = compiled([])
    assert m.num_states == 1 and m.accepts_empty
    assert m.warnings
    assert match_floating(m, toks("abc")) == []
    assert m.longest_from(toks("abc"), 0, allow_empty=True).token_range == (0, 0)


def test_recursive_flag_carried(pack_kb):
    assert pack_kb.compiled["g.MassDescriptionFrame"].recursive
    assert not pack_kb.compiled["g.AnatomyConcept"].recursive


def test_greedy_earlier_element_wins():
    m = compiled([lit("a", Quantifier.STAR, "x"), lit("a", Quantifier.STAR, "y")])
    r = match_at(m, toks("aaa"), 0)
    assert r.token_range == (0, 3) and r.bindings == {"x": (0, 1, 2)}


def test_anchor_must_be_consumed_by_anchor_element():
    m = compiled([lit("a", Quantifier.STAR), lit("a", anchor=True), lit("b")])
    assert match_at(m, toks("aab"), 1).token_range == (0, 3)
    # the anchor element would have to take the first "a", leaving "ab" unmatched
    assert match_at(m, toks("aab"), 0) is None
    assert match_at(m, toks("aab"), 2) is None


def test_match_at_out_of_range():
    with pytest.raises(IndexError):
        match_at(compiled([lit("a")]), toks("a"), 1)


# -- constraints --------------------------------------------------------------------

def test_l1_prefix_is_segment_wise():
    assert l1_prefix_match("physobj.anatomy", "physobj")
    assert l1_prefix_match("physobj", "physobj")
    assert not l1_prefix_match("physobjects", "physobj")
    assert not l1_prefix_match(None, "physobj")


def test_plain_and_node_tokens(pack_kb):
    m = pack_kb.compiled["g.AnatomyDescription"]
    plain_lobe = Token(0, 1, (0, 4), "lobe", "physobj.anatomy")
    lung = Token(1, 2, (0, 4), "lung", "physobj.anatomy", node_instance=NodeInstance("LungAnatomy"))
    the = Token(2, 1, (0, 3), "the", "pos.defin_art")
    assert match_at(m, [the, plain_lobe], 1) is None
    r = match_at(m, [the, lung], 1)
    assert r.token_range == (0, 2) and r.bindings == {"anatomy": (1,)}
    # literal constraints ignore instantiated tokens
    lit_m = compile_grammar(GrammarSpec("g", (lit("lung"),)), pack_kb)
    assert match_at(lit_m, [lung], 0) is None


def test_unknown_node_reference(pack_kb):
    spec = GrammarSpec("g", (Matcher(Constraint(ConstraintType.NODE, "Spleen")),))
    with pytest.raises(UnknownReference):
        compile_grammar(spec, pack_kb)


def test_kind_constraint(pack_kb):
    spec = GrammarSpec("g", (Matcher(Constraint(ConstraintType.KIND, "ontologic-proposition")),))
    m = compile_grammar(spec, pack_kb)
    sr = Token(0, 3, (0, 2), "in x", node_instance=NodeInstance("SpatialRelation"))
    ac = Token(1, 2, (0, 2), "lobe", node_instance=NodeInstance("AnatomyConcept"))
    assert match_at(m, [sr], 0) is not None
    assert match_at(m, [ac], 0) is None
