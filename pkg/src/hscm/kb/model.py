"""Data model for a hierarchical semantic compositional model (HSCM).

Everything here is frozen: a ``KnowledgeBase`` is built once by the loader
and then shared read-only between parses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping

__all__ = [
    "UNKNOWN_CLASS",
    "SENTINEL_CLASS",
    "NodeKind",
    "Cardinality",
    "EntryKind",
    "TriggerKind",
    "OverlapCondition",
    "Quantifier",
    "ConstraintType",
    "RESERVED_FEATURES",
    "Constraint",
    "SlotSpec",
    "SemanticNode",
    "LexiconEntry",
    "Matcher",
    "GrammarSpec",
    "ActivationLink",
    "SuppressionPattern",
    "GenSpecLink",
    "PrecedenceRule",
    "SequenceModel",
    "KBConfig",
    "KnowledgeBase",
]

UNKNOWN_CLASS = "_UNKNOWN"
SENTINEL_CLASS = "_SENTINEL"


class NodeKind(str, Enum):
    PRIMITIVE = "ontologic-primitive"
    PROPOSITION = "ontologic-proposition"
    FRAME = "object-event-frame"
    DISCOURSE = "discourse-template"

    @property
    def layer(self) -> int:
        return _KIND_LAYER[self]


_KIND_LAYER = {
    NodeKind.PRIMITIVE: 2,
    NodeKind.PROPOSITION: 3,
    NodeKind.FRAME: 4,
    NodeKind.DISCOURSE: 5,
}


class Cardinality(str, Enum):
    ONE = "one"
    OPTIONAL = "optional"
    MANY = "many"


class EntryKind(str, Enum):
    WORD = "word"
    COLLOCATION = "collocation"
    ABBREVIATION = "abbreviation"
    IDIOM = "idiom"
    MEASUREMENT_SPLITTER = "measurement-splitter"


class TriggerKind(str, Enum):
    ANCHORED = "anchored"
    FLOATING = "floating"
    CASCADING = "cascading"


class OverlapCondition(str, Enum):
    ALWAYS = "always"
    PARTIAL = "partial-overlap"
    FULL = "full-overlap"


class Quantifier(str, Enum):
    ONE = "exactly-one"
    OPTIONAL = "optional"
    STAR = "zero-or-more"
    PLUS = "one-or-more"

    @property
    def nullable(self) -> bool:
        return self in (Quantifier.OPTIONAL, Quantifier.STAR)

    @property
    def repeats(self) -> bool:
        return self in (Quantifier.STAR, Quantifier.PLUS)


class ConstraintType(str, Enum):
    LITERAL = "literal"
    L1 = "l1"
    NODE = "node"
    KIND = "kind"
    SUPERCLASS_OF = "superclass_of"
    ANY = "any"
    # Reserved lexical features that are not computed; a KB naming them is
    # rejected by validation.
    MORPHOLOGY = "morphology"
    EMBEDDING = "embedding"


RESERVED_FEATURES = frozenset({ConstraintType.MORPHOLOGY, ConstraintType.EMBEDDING})


@dataclass(frozen=True)
class Constraint:
    type: ConstraintType
    value: str | None = None
    options: tuple[Constraint, ...] = ()

    def node_refs(self) -> list[str]:
        if self.type in (ConstraintType.NODE, ConstraintType.SUPERCLASS_OF):
            return [self.value]
        refs = []
        for opt in self.options:
            refs.extend(opt.node_refs())
        return refs

    def describe(self) -> str:
        if self.type is ConstraintType.ANY:
            return "any(" + ", ".join(o.describe() for o in self.options) + ")"
        return f"{self.type.value}={self.value}"

    def to_dict(self) -> dict:
        if self.type is ConstraintType.ANY:
            return {"any": [o.to_dict() for o in self.options]}
        return {self.type.value: self.value}


@dataclass(frozen=True)
class SlotSpec:
    name: str
    accepted: tuple[Constraint, ...]
    cardinality: Cardinality = Cardinality.OPTIONAL

    @property
    def mandatory(self) -> bool:
        return self.cardinality is Cardinality.ONE


@dataclass(frozen=True)
class SemanticNode:
    id: str
    layer: int
    kind: NodeKind
    label: str
    slots: tuple[SlotSpec, ...] = ()
    grammar_id: str | None = None
    attribute_node_ids: tuple[str, ...] = ()

    def slot(self, name: str) -> SlotSpec | None:
        for s in self.slots:
            if s.name == name:
                return s
        return None


@dataclass(frozen=True)
class LexiconEntry:
    surface: tuple[str, ...]
    functional: str
    l1_class: str
    pos: str
    entry_kind: EntryKind = EntryKind.WORD


@dataclass(frozen=True)
class Matcher:
    constraint: Constraint
    quantifier: Quantifier = Quantifier.ONE
    capture: str | None = None
    anchor: bool = False


@dataclass(frozen=True)
class GrammarSpec:
    id: str
    elements: tuple[Matcher, ...]
    recursive: bool = False

    @property
    def anchor_index(self) -> int | None:
        for i, m in enumerate(self.elements):
            if m.anchor:
                return i
        return None


@dataclass(frozen=True)
class ActivationLink:
    target_node_id: str
    trigger_kind: TriggerKind
    trigger: Constraint | None = None
    context_filter: tuple[str, ...] = ()
    prior: float = 1.0


@dataclass(frozen=True)
class SuppressionPattern:
    target_node_id: str
    pattern: str  # grammar id


@dataclass(frozen=True)
class GenSpecLink:
    subclass_node_id: str
    superclass_node_id: str


@dataclass(frozen=True)
class PrecedenceRule:
    winner: str  # node id or node kind value
    loser: str
    condition: OverlapCondition = OverlapCondition.ALWAYS


@dataclass(frozen=True)
class SequenceModel:
    bigram_counts: Mapping[tuple[str, str], int] = field(
        default_factory=lambda: MappingProxyType({})
    )

    def count(self, left: str, right: str) -> int:
        return self.bigram_counts.get((left, right), 0)

    def classes(self) -> list[str]:
        seen = set()
        for a, b in self.bigram_counts:
            seen.add(a)
            seen.add(b)
        seen.discard(SENTINEL_CLASS)
        seen.discard(UNKNOWN_CLASS)
        return sorted(seen)


@dataclass(frozen=True)
class KBConfig:
    max_levels: int = 8
    max_recursion_depth: int = 4
    cascade_depth: int = 2
    number_l1_class: str = "number"
    number_pos: str = "adjective"


@dataclass(frozen=True, eq=False)
class KnowledgeBase:
    """Compiled, immutable HSCM.

    ``compiled`` maps grammar ids to compiled matchers; grammars whose
    references do not resolve are left out and reported by validation.
    """

    nodes: Mapping[str, SemanticNode]
    lexicon: tuple[LexiconEntry, ...]
    grammars: Mapping[str, GrammarSpec]
    activation_links: tuple[ActivationLink, ...]
    suppression_patterns: tuple[SuppressionPattern, ...]
    genspec_links: tuple[GenSpecLink, ...]
    precedence_rules: tuple[PrecedenceRule, ...]
    sequence_model: SequenceModel
    config: KBConfig
    compiled: Mapping[str, object] = field(default_factory=lambda: MappingProxyType({}))
    load_warnings: tuple[str, ...] = ()

    def __post_init__(self):
        supers: dict[str, list[str]] = {}
        for link in self.genspec_links:
            supers.setdefault(link.subclass_node_id, []).append(link.superclass_node_id)
        object.__setattr__(self, "_supers", {k: tuple(v) for k, v in supers.items()})
        object.__setattr__(self, "_chains", {})

    def node(self, node_id: str) -> SemanticNode:
        from ..errors import UnknownNode

        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def direct_superclasses(self, node_id: str) -> tuple[str, ...]:
        return self._supers.get(node_id, ())

    def is_a(self, node_id: str, ancestor: str) -> bool:
        """True when ``ancestor`` is ``node_id`` or one of its superclasses."""
        from .query import superclass_chain

        if node_id == ancestor:
            return True
        if node_id not in self.nodes:
            return False
        return ancestor in superclass_chain(self, node_id)

    def grammar_for(self, node_id: str) -> GrammarSpec | None:
        """Nearest grammar along the superclass chain (grammar inheritance)."""
        from .query import superclass_chain

        for nid in superclass_chain(self, node_id):
            gid = self.nodes[nid].grammar_id
            if gid is not None and gid in self.grammars:
                return self.grammars[gid]
        return None
