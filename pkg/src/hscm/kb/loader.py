"""Reading knowledge-base documents.

The KB is a single UTF-8 JSON document with a fixed set of top-level
sections.  Shape problems raise ``SchemaError``; reference and structure
problems are left to :func:`hscm.kb.validate.validate_kb`.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

from ..errors import SchemaError, UnknownReference, ValidationError
from .model import (
    ActivationLink,
    Cardinality,
    Constraint,
    ConstraintType,
    EntryKind,
    GenSpecLink,
    GrammarSpec,
    KBConfig,
    KnowledgeBase,
    LexiconEntry,
    Matcher,
    NodeKind,
    OverlapCondition,
    PrecedenceRule,
    Quantifier,
    SemanticNode,
    SequenceModel,
    SlotSpec,
    SuppressionPattern,
    TriggerKind,
)

TOP_LEVEL_KEYS = (
    "config",
    "nodes",
    "lexicon",
    "grammars",
    "activation",
    "suppression",
    "genspec",
    "precedence",
    "sequence_model",
)


class _Reader:
    def __init__(self, strict: bool):
        self.strict = strict
        self.warnings: list[str] = []

    def obj(self, value, path: str, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> dict:
        if not isinstance(value, dict):
            raise SchemaError(f"{path}: expected an object, got {type(value).__name__}")
        for key in required:
            if key not in value:
                raise SchemaError(f"{path}: missing required key {key!r}")
        extra = sorted(set(value) - set(required) - set(optional))
        if extra:
            msg = f"{path}: unknown key(s) {', '.join(map(repr, extra))}"
            if self.strict:
                raise SchemaError(msg)
            self.warnings.append(msg)
        return value

    @staticmethod
    def list(value, path: str) -> list:
        if not isinstance(value, list):
            raise SchemaError(f"{path}: expected a list, got {type(value).__name__}")
        return value

    @staticmethod
    def str(value, path: str) -> str:
        if not isinstance(value, str) or not value:
            raise SchemaError(f"{path}: expected a non-empty string")
        return value

    @staticmethod
    def int(value, path: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"{path}: expected an integer")
        return value

    @staticmethod
    def enum(enum_cls, value, path: str):
        try:
            return enum_cls(value)
        except ValueError:
            allowed = ", ".join(e.value for e in enum_cls)
            raise SchemaError(f"{path}: {value!r} is not one of {allowed}") from None

    def constraint(self, value, path: str) -> Constraint:
        if not isinstance(value, dict) or len(value) != 1:
            raise SchemaError(f"{path}: a constraint is an object with exactly one key")
        (key, arg), = value.items()
        ctype = self.enum(ConstraintType, key, path)
        if ctype is ConstraintType.ANY:
            opts = self.list(arg, f"{path}.any")
            if not opts:
                raise SchemaError(f"{path}.any: needs at least one alternative")
            return Constraint(ctype, None, tuple(self.constraint(o, f"{path}.any[{i}]") for i, o in enumerate(opts)))
        return Constraint(ctype, self.str(arg, f"{path}.{key}"))


def _read_config(r: _Reader, raw) -> KBConfig:
    fields = ("max_levels", "max_recursion_depth", "cascade_depth", "number_l1_class", "number_pos")
    raw = r.obj(raw, "config", (), fields)
    kwargs: dict[str, Any] = {}
    for key in fields[:3]:
        if key in raw:
            kwargs[key] = r.int(raw[key], f"config.{key}")
            if kwargs[key] < 0:
                raise SchemaError(f"config.{key}: must be non-negative")
    for key in fields[3:]:
        if key in raw:
            kwargs[key] = r.str(raw[key], f"config.{key}")
    return KBConfig(**kwargs)


def _read_node(r: _Reader, raw, path: str) -> SemanticNode:
    raw = r.obj(raw, path, ("id", "layer", "kind", "label", "slots"), ("grammar", "attributes"))
    slots = []
    for i, s in enumerate(r.list(raw["slots"], f"{path}.slots")):
        spath = f"{path}.slots[{i}]"
        s = r.obj(s, spath, ("name", "accepts"), ("cardinality",))
        accepts = tuple(
            r.constraint(a, f"{spath}.accepts[{j}]") for j, a in enumerate(r.list(s["accepts"], f"{spath}.accepts"))
        )
        card = r.enum(Cardinality, s.get("cardinality", "optional"), f"{spath}.cardinality")
        slots.append(SlotSpec(r.str(s["name"], f"{spath}.name"), accepts, card))
    grammar = raw.get("grammar")
    if grammar is not None:
        grammar = r.str(grammar, f"{path}.grammar")
    attrs = tuple(r.str(a, f"{path}.attributes[{i}]") for i, a in enumerate(r.list(raw.get("attributes", []), f"{path}.attributes")))
    return SemanticNode(
        id=r.str(raw["id"], f"{path}.id"),
        layer=r.int(raw["layer"], f"{path}.layer"),
        kind=r.enum(NodeKind, raw["kind"], f"{path}.kind"),
        label=r.str(raw["label"], f"{path}.label"),
        slots=tuple(slots),
        grammar_id=grammar,
        attribute_node_ids=attrs,
    )


def _read_lexicon_entry(r: _Reader, raw, path: str) -> LexiconEntry:
    raw = r.obj(raw, path, ("surface", "functional", "l1_class", "pos"), ("kind",))
    surface = raw["surface"]
    if isinstance(surface, str):
        surface = [surface]
    surface = tuple(r.str(s, f"{path}.surface") for s in r.list(surface, f"{path}.surface"))
    if not surface:
        raise SchemaError(f"{path}.surface: at least one surface form is required")
    return LexiconEntry(
        surface=surface,
        functional=r.str(raw["functional"], f"{path}.functional"),
        l1_class=r.str(raw["l1_class"], f"{path}.l1_class"),
        pos=r.str(raw["pos"], f"{path}.pos"),
        entry_kind=r.enum(EntryKind, raw.get("kind", "word"), f"{path}.kind"),
    )


def _read_grammar(r: _Reader, raw, path: str) -> GrammarSpec:
    raw = r.obj(raw, path, ("id", "elements"), ("recursive",))
    elements = []
    for i, e in enumerate(r.list(raw["elements"], f"{path}.elements")):
        epath = f"{path}.elements[{i}]"
        e = r.obj(e, epath, ("constraint",), ("quantifier", "capture", "anchor"))
        capture = e.get("capture")
        if capture is not None:
            capture = r.str(capture, f"{epath}.capture")
        anchor = e.get("anchor", False)
        if not isinstance(anchor, bool):
            raise SchemaError(f"{epath}.anchor: expected a boolean")
        elements.append(
            Matcher(
                constraint=r.constraint(e["constraint"], f"{epath}.constraint"),
                quantifier=r.enum(Quantifier, e.get("quantifier", "exactly-one"), f"{epath}.quantifier"),
                capture=capture,
                anchor=anchor,
            )
        )
    recursive = raw.get("recursive", False)
    if not isinstance(recursive, bool):
        raise SchemaError(f"{path}.recursive: expected a boolean")
    return GrammarSpec(r.str(raw["id"], f"{path}.id"), tuple(elements), recursive)


def _read_link(r: _Reader, raw, path: str) -> ActivationLink:
    raw = r.obj(raw, path, ("target", "kind"), ("trigger", "context", "prior"))
    trigger = raw.get("trigger")
    if trigger is not None:
        trigger = r.constraint(trigger, f"{path}.trigger")
    context = raw.get("context", [])
    if isinstance(context, str):
        context = [context]
    context = tuple(r.str(c, f"{path}.context") for c in r.list(context, f"{path}.context"))
    prior = raw.get("prior", 1.0)
    if isinstance(prior, bool) or not isinstance(prior, (int, float)):
        raise SchemaError(f"{path}.prior: expected a number")
    if prior < 0:
        raise SchemaError(f"{path}.prior: must be non-negative")
    return ActivationLink(
        target_node_id=r.str(raw["target"], f"{path}.target"),
        trigger_kind=r.enum(TriggerKind, raw["kind"], f"{path}.kind"),
        trigger=trigger,
        context_filter=context,
        prior=float(prior),
    )


def _read_sequence_model(r: _Reader, raw) -> SequenceModel:
    raw = r.obj(raw, "sequence_model", (), ("bigrams",))
    counts: dict[tuple[str, str], int] = {}
    for i, row in enumerate(r.list(raw.get("bigrams", []), "sequence_model.bigrams")):
        path = f"sequence_model.bigrams[{i}]"
        if not isinstance(row, list) or len(row) != 3:
            raise SchemaError(f"{path}: expected [left_class, right_class, count]")
        left, right, count = r.str(row[0], path), r.str(row[1], path), r.int(row[2], path)
        if count < 0:
            raise SchemaError(f"{path}: counts must be non-negative")
        counts[(left, right)] = counts.get((left, right), 0) + count
    return SequenceModel(MappingProxyType(counts))


def build_kb(doc: Mapping, *, strict: bool = True) -> KnowledgeBase:
    """Turn a decoded document into an (unvalidated) KnowledgeBase."""
    r = _Reader(strict)
    if not isinstance(doc, dict):
        raise SchemaError("top level: expected an object")
    missing = [k for k in TOP_LEVEL_KEYS if k not in doc]
    if missing:
        raise SchemaError(f"top level: missing section(s) {', '.join(missing)}")
    r.obj(doc, "top level", TOP_LEVEL_KEYS)

    nodes: dict[str, SemanticNode] = {}
    for i, raw in enumerate(r.list(doc["nodes"], "nodes")):
        node = _read_node(r, raw, f"nodes[{i}]")
        if node.id in nodes:
            raise SchemaError(f"nodes[{i}]: duplicate node id {node.id!r}")
        nodes[node.id] = node

    grammars: dict[str, GrammarSpec] = {}
    for i, raw in enumerate(r.list(doc["grammars"], "grammars")):
        g = _read_grammar(r, raw, f"grammars[{i}]")
        if g.id in grammars:
            raise SchemaError(f"grammars[{i}]: duplicate grammar id {g.id!r}")
        grammars[g.id] = g

    lexicon = tuple(_read_lexicon_entry(r, e, f"lexicon[{i}]") for i, e in enumerate(r.list(doc["lexicon"], "lexicon")))
    links = tuple(_read_link(r, e, f"activation[{i}]") for i, e in enumerate(r.list(doc["activation"], "activation")))

    suppression = []
    for i, raw in enumerate(r.list(doc["suppression"], "suppression")):
        raw = r.obj(raw, f"suppression[{i}]", ("target", "pattern"))
        suppression.append(SuppressionPattern(r.str(raw["target"], f"suppression[{i}].target"), r.str(raw["pattern"], f"suppression[{i}].pattern")))

    genspec = []
    for i, raw in enumerate(r.list(doc["genspec"], "genspec")):
        raw = r.obj(raw, f"genspec[{i}]", ("subclass", "superclass"))
        genspec.append(GenSpecLink(r.str(raw["subclass"], f"genspec[{i}].subclass"), r.str(raw["superclass"], f"genspec[{i}].superclass")))

    precedence = []
    for i, raw in enumerate(r.list(doc["precedence"], "precedence")):
        path = f"precedence[{i}]"
        raw = r.obj(raw, path, ("winner", "loser"), ("condition",))
        precedence.append(
            PrecedenceRule(
                winner=r.str(raw["winner"], f"{path}.winner"),
                loser=r.str(raw["loser"], f"{path}.loser"),
                condition=r.enum(OverlapCondition, raw.get("condition", "always"), f"{path}.condition"),
            )
        )

    kb = KnowledgeBase(
        nodes=MappingProxyType(nodes),
        lexicon=lexicon,
        grammars=MappingProxyType(grammars),
        activation_links=links,
        suppression_patterns=tuple(suppression),
        genspec_links=tuple(genspec),
        precedence_rules=tuple(precedence),
        sequence_model=_read_sequence_model(r, doc["sequence_model"]),
        config=_read_config(r, doc["config"]),
        load_warnings=tuple(r.warnings),
    )
    object.__setattr__(kb, "compiled", MappingProxyType(_compile_all(kb)))
    return kb


def _compile_all(kb: KnowledgeBase) -> dict:
    from ..grammar import compile_grammar

    owners: dict[str, str] = {}
    for node in kb.nodes.values():
        if node.grammar_id is not None:
            owners.setdefault(node.grammar_id, node.id)
    compiled = {}
    for gid, spec in kb.grammars.items():
        try:
            compiled[gid] = compile_grammar(spec, kb, owners.get(gid))
        except UnknownReference:
            # reported by validate_kb
            continue
    return compiled


def load_kb(source, *, strict: bool = True, validate: bool = True) -> KnowledgeBase:
    """Load a knowledge base from JSON text, bytes, an already-decoded mapping,
    or a filesystem path (``pathlib.Path``).

    With ``validate`` (the default) a KB with any validation error raises
    ``ValidationError``; pass ``validate=False`` to inspect a broken KB.
    """
    if isinstance(source, (os.PathLike,)):
        source = Path(source).read_bytes()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"KB document is not valid UTF-8: {exc}") from None
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    else:
        doc = source
    kb = build_kb(doc, strict=strict)
    if validate:
        from .validate import validate_kb

        report = validate_kb(kb)
        if report.errors:
            raise ValidationError(report)
    return kb
