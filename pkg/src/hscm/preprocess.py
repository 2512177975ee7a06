"""L0 tokenization and L1 lexical analysis."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .errors import EncodingError
from .kb.model import UNKNOWN_CLASS, EntryKind, KnowledgeBase, LexiconEntry

_BRACKETS = "()[]{}"
_QUOTES = '"“”‘’«»'
_EDGE_PUNCT = ".,;:!?'"
_NUMBER_RE = re.compile(r"^[+-]?\d+(?:\.\d+)?$")
_MEASURE_RE = re.compile(r"^([+-]?\d+(?:\.\d+)?)(\D.*)$")

UNKNOWN_POS = "_UNKNOWN"


@dataclass(frozen=True)
class SurfaceToken:
    text: str
    span: tuple[int, int]

    def to_dict(self) -> dict:
        return {"text": self.text, "span": list(self.span)}

    @classmethod
    def from_dict(cls, d: dict) -> SurfaceToken:
        return cls(d["text"], tuple(d["span"]))


@dataclass(frozen=True)
class FunctionalToken:
    text: str
    span: tuple[int, int]
    l1_class: str
    pos: str
    source: tuple[int, ...]
    # reserved, never computed
    morphology: None = None
    embedding: None = None

    node_id = None  # functional tokens are always plain

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "span": list(self.span),
            "l1_class": self.l1_class,
            "pos": self.pos,
            "source": list(self.source),
        }

    @classmethod
    def from_dict(cls, d: dict) -> FunctionalToken:
        return cls(d["text"], tuple(d["span"]), d["l1_class"], d["pos"], tuple(d["source"]))


def _decode(sentence) -> str:
    if isinstance(sentence, (bytes, bytearray)):
        try:
            return bytes(sentence).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError(f"input is not valid UTF-8: {exc}") from None
    try:
        sentence.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise EncodingError(f"input is not valid UTF-8: {exc}") from None
    return sentence


def _is_delimiter(ch: str) -> bool:
    return ch.isspace() or ch in _BRACKETS or ch in _QUOTES


def tokenize_l0(sentence) -> list[SurfaceToken]:
    """Split on whitespace, brackets and quotes.

    Punctuation at either edge of a chunk (``.,;:!?`` and apostrophes) is
    ignorable and left out of the span; hyphens, slashes and decimal points
    inside a chunk are kept.
    """
    text = _decode(sentence)
    out = []
    i, n = 0, len(text)
    while i < n:
        if _is_delimiter(text[i]):
            i += 1
            continue
        j = i
        while j < n and not _is_delimiter(text[j]):
            j += 1
        s, e = i, j
        while s < e and text[s] in _EDGE_PUNCT:
            s += 1
        while e > s and text[e - 1] in _EDGE_PUNCT:
            e -= 1
        if s < e:
            out.append(SurfaceToken(text[s:e], (s, e)))
        i = j
    return out


@dataclass(frozen=True)
class _LexIndex:
    words: dict
    collocations: dict
    max_colloc: int
    abbreviations: dict
    splitters: dict


def _lex_index(kb: KnowledgeBase) -> _LexIndex:
    idx = kb.__dict__.get("_lex_index")
    if idx is not None:
        return idx
    words: dict[str, LexiconEntry] = {}
    collocs: dict[tuple[str, ...], LexiconEntry] = {}
    abbrevs: dict[str, LexiconEntry] = {}
    splitters: dict[str, LexiconEntry] = {}
    for entry in kb.lexicon:
        kind = entry.entry_kind
        if kind in (EntryKind.COLLOCATION, EntryKind.IDIOM):
            collocs.setdefault(tuple(w.casefold() for w in entry.surface), entry)
        elif kind is EntryKind.ABBREVIATION:
            for s in entry.surface:
                abbrevs.setdefault(s, entry)
        elif kind is EntryKind.MEASUREMENT_SPLITTER:
            for s in entry.surface:
                splitters.setdefault(s.casefold(), entry)
        else:
            for s in entry.surface:
                words.setdefault(s.casefold(), entry)
    for unit, entry in splitters.items():
        words.setdefault(unit, entry)
    idx = _LexIndex(words, collocs, max((len(k) for k in collocs), default=0), abbrevs, splitters)
    object.__setattr__(kb, "_lex_index", idx)
    return idx


@dataclass
class _Work:
    text: str
    span: tuple[int, int]
    source: tuple[int, ...]
    entry: LexiconEntry | None = None
    is_number: bool = False
    split: bool = False


def lexical_analyze(kb: KnowledgeBase, surface: Sequence[SurfaceToken]) -> list[FunctionalToken]:
    """Map surface words to functional words with L1 class and POS.

    Order of operations: measurement splits, collocation/idiom merges
    (longest first), abbreviation expansion, lexicon lookup, and finally the
    sequence-model guess for tokens still tagged ``_UNKNOWN`` (applied only
    when a single candidate scores highest).
    """
    idx = _lex_index(kb)
    cfg = kb.config

    work: list[_Work] = []
    for i, tok in enumerate(surface):
        m = _MEASURE_RE.match(tok.text)
        if m and m.group(2).casefold() in idx.splitters:
            s, _ = tok.span
            cut = s + len(m.group(1))
            work.append(_Work(m.group(1), (s, cut), (i,), None, True, True))
            work.append(_Work(m.group(2), (cut, tok.span[1]), (i,), idx.splitters[m.group(2).casefold()], False, True))
        else:
            work.append(_Work(tok.text, tok.span, (i,)))

    merged: list[_Work] = []
    p = 0
    while p < len(work):
        hit = None
        for length in range(min(idx.max_colloc, len(work) - p), 1, -1):
            window = work[p:p + length]
            if any(w.split for w in window):
                continue
            entry = idx.collocations.get(tuple(w.text.casefold() for w in window))
            if entry is not None:
                hit = (length, entry)
                break
        if hit:
            length, entry = hit
            window = work[p:p + length]
            merged.append(
                _Work(
                    entry.functional,
                    (window[0].span[0], window[-1].span[1]),
                    tuple(s for w in window for s in w.source),
                    entry,
                )
            )
            p += length
        else:
            merged.append(work[p])
            p += 1

    for w in merged:
        if w.entry is None and not w.is_number and w.text in idx.abbreviations:
            w.entry = idx.abbreviations[w.text]
            w.text = w.entry.functional

    tokens = []
    for w in merged:
        if w.entry is None and (w.is_number or _NUMBER_RE.match(w.text)):
            tokens.append(FunctionalToken(w.text, w.span, cfg.number_l1_class, cfg.number_pos, w.source))
            continue
        entry = w.entry or idx.words.get(w.text.casefold())
        if entry is None:
            tokens.append(FunctionalToken(w.text, w.span, UNKNOWN_CLASS, UNKNOWN_POS, w.source))
        else:
            text = w.text if entry.entry_kind is EntryKind.WORD else entry.functional
            tokens.append(FunctionalToken(text, w.span, entry.l1_class, entry.pos, w.source))

    if any(t.l1_class == UNKNOWN_CLASS for t in tokens):
        from .kb.query import query_unknown_assignment

        snapshot = list(tokens)
        for i, tok in enumerate(snapshot):
            if tok.l1_class != UNKNOWN_CLASS:
                continue
            ranked = query_unknown_assignment(kb, snapshot, i)
            if ranked and (len(ranked) == 1 or ranked[0][1] > ranked[1][1]):
                tokens[i] = FunctionalToken(tok.text, tok.span, ranked[0][0], tok.pos, tok.source)
    return tokens


def preprocess(kb: KnowledgeBase, sentence) -> tuple[list[SurfaceToken], list[FunctionalToken]]:
    surface = tokenize_l0(sentence)
    return surface, lexical_analyze(kb, surface)
