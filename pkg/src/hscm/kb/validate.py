"""Lint and integrity checks for a loaded knowledge base."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import UnknownReference
from .model import (
    Cardinality,
    Constraint,
    ConstraintType,
    EntryKind,
    KnowledgeBase,
    NodeKind,
    OverlapCondition,
    RESERVED_FEATURES,
    TriggerKind,
)


@dataclass(frozen=True)
class Finding:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass
class ValidationReport:
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, path: str, message: str) -> None:
        self.errors.append(Finding(path, message))

    def warn(self, path: str, message: str) -> None:
        self.warnings.append(Finding(path, message))

    def to_dict(self) -> dict:
        return {
            "errors": [{"path": f.path, "message": f.message} for f in self.errors],
            "warnings": [{"path": f.path, "message": f.message} for f in self.warnings],
        }

    def format(self) -> str:
        lines = [f"{len(self.errors)} error(s), {len(self.warnings)} warning(s)"]
        lines += [f"error   {f}" for f in self.errors]
        lines += [f"warning {f}" for f in self.warnings]
        return "\n".join(lines)


def _check_constraint(kb: KnowledgeBase, c: Constraint, path: str, report: ValidationReport) -> None:
    if c.type in RESERVED_FEATURES:
        report.error(path, f"lexical feature {c.type.value!r} is reserved and not supported by the lexical analyzer")
    elif c.type in (ConstraintType.NODE, ConstraintType.SUPERCLASS_OF):
        if c.value not in kb.nodes:
            report.error(path, f"unresolved node id {c.value!r}")
    elif c.type is ConstraintType.KIND:
        if c.value not in {k.value for k in NodeKind}:
            report.error(path, f"unknown node kind {c.value!r}")
    elif c.type is ConstraintType.L1:
        if not _valid_l1(c.value):
            report.error(path, f"malformed L1 class path {c.value!r}")
    for i, opt in enumerate(c.options):
        _check_constraint(kb, opt, f"{path}.any[{i}]", report)


def _valid_l1(path: str) -> bool:
    return bool(path) and all(seg for seg in path.split("."))


def _find_cycle(graph: dict[str, list[str]]) -> list[str] | None:
    """Return one cycle as a node list, or None.  Iterative DFS, sorted for
    stable output."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph}
    for root in sorted(graph):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(sorted(graph[root])))]
        trail = [root]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                trail.pop()
                color[node] = BLACK
                continue
            if nxt not in color:
                continue
            if color[nxt] == GREY:
                return trail[trail.index(nxt):] + [nxt]
            if color[nxt] == WHITE:
                color[nxt] = GREY
                trail.append(nxt)
                stack.append((nxt, iter(sorted(graph[nxt]))))
    return None


def _acceptor_targets(kb: KnowledgeBase, c: Constraint) -> set[str]:
    if c.type is ConstraintType.NODE and c.value in kb.nodes:
        return {c.value}
    if c.type is ConstraintType.SUPERCLASS_OF and c.value in kb.nodes:
        return {nid for nid in kb.nodes if _is_a_safe(kb, nid, c.value)}
    if c.type is ConstraintType.KIND:
        return {n.id for n in kb.nodes.values() if n.kind.value == c.value}
    out: set[str] = set()
    for opt in c.options:
        out |= _acceptor_targets(kb, opt)
    return out


def _is_a_safe(kb: KnowledgeBase, nid: str, ancestor: str) -> bool:
    # gen-spec walk that tolerates cycles (validation runs before they are ruled out)
    seen, todo = set(), [nid]
    while todo:
        cur = todo.pop()
        if cur == ancestor:
            return True
        if cur in seen:
            continue
        seen.add(cur)
        todo.extend(kb.direct_superclasses(cur))
    return False


def _matches_rule_side(kb: KnowledgeBase, side: str, node_id: str) -> bool:
    node = kb.nodes.get(node_id)
    return side == node_id or (node is not None and side == node.kind.value)


def validate_kb(kb: KnowledgeBase) -> ValidationReport:
    """Check every integrity invariant; never raises."""
    report = ValidationReport()
    for msg in kb.load_warnings:
        report.warn("schema", msg)
    kinds = {k.value for k in NodeKind}

    owners: dict[str, list[str]] = {}
    for nid, node in kb.nodes.items():
        path = f"nodes[{nid}]"
        if node.layer != node.kind.layer:
            report.error(path, f"kind {node.kind.value} requires layer {node.kind.layer}, got {node.layer}")
        if node.kind is NodeKind.PRIMITIVE and node.slots:
            report.error(path, "ontologic primitives cannot declare slots")
        names = set()
        for slot in node.slots:
            spath = f"{path}.slots[{slot.name}]"
            if slot.name in names:
                report.error(spath, "duplicate slot name")
            names.add(slot.name)
            if not slot.accepted:
                report.error(spath, "slot accepts nothing")
            for i, acc in enumerate(slot.accepted):
                _check_constraint(kb, acc, f"{spath}.accepts[{i}]", report)
        for attr in node.attribute_node_ids:
            if attr not in kb.nodes:
                report.error(f"{path}.attributes", f"unresolved attribute node id {attr!r}")
        if node.grammar_id is not None:
            if node.grammar_id not in kb.grammars:
                report.error(f"{path}.grammar", f"unresolved grammar id {node.grammar_id!r}")
            else:
                owners.setdefault(node.grammar_id, []).append(nid)

    for i, entry in enumerate(kb.lexicon):
        path = f"lexicon[{i}]"
        if not _valid_l1(entry.l1_class):
            report.error(path, f"malformed L1 class path {entry.l1_class!r}")
        if entry.entry_kind in (EntryKind.COLLOCATION, EntryKind.IDIOM) and len(entry.surface) < 2:
            report.error(path, f"{entry.entry_kind.value} entries need at least two surface words")

    for gid, spec in kb.grammars.items():
        path = f"grammars[{gid}]"
        anchors = [i for i, m in enumerate(spec.elements) if m.anchor]
        if len(anchors) > 1:
            report.error(path, "more than one anchor element")
        for i in anchors:
            if spec.elements[i].quantifier.nullable:
                report.error(f"{path}.elements[{i}]", "anchor element must be mandatory")
        for i, m in enumerate(spec.elements):
            _check_constraint(kb, m.constraint, f"{path}.elements[{i}].constraint", report)
        for owner in owners.get(gid, []):
            slot_names = {s.name for s in kb.nodes[owner].slots}
            for i, m in enumerate(spec.elements):
                if m.capture is not None and m.capture not in slot_names:
                    report.error(f"{path}.elements[{i}]", f"capture {m.capture!r} is not a slot of {owner!r}")
            if spec.recursive:
                refs = {r for m in spec.elements for r in m.constraint.node_refs()}
                if not any(r == owner or (r in kb.nodes and _is_a_safe(kb, owner, r)) for r in refs):
                    report.error(path, f"flagged recursive but no element references {owner!r}")
        if not spec.elements:
            report.warn(path, "grammar has no elements and only matches the empty range")

    for i, link in enumerate(kb.activation_links):
        path = f"activation[{i}]"
        if link.target_node_id not in kb.nodes:
            report.error(path, f"unresolved target node id {link.target_node_id!r}")
        if link.trigger_kind is TriggerKind.FLOATING:
            if link.trigger is not None:
                report.error(path, "floating links must not carry a trigger")
        elif link.trigger is None:
            report.error(path, f"{link.trigger_kind.value} links need a trigger")
        else:
            if link.trigger_kind is TriggerKind.CASCADING and link.trigger.type is not ConstraintType.NODE:
                report.error(path, "cascading links must originate from a node trigger")
            _check_constraint(kb, link.trigger, f"{path}.trigger", report)

    for i, sup in enumerate(kb.suppression_patterns):
        path = f"suppression[{i}]"
        if sup.target_node_id not in kb.nodes:
            report.error(path, f"unresolved target node id {sup.target_node_id!r}")
        if sup.pattern not in kb.grammars:
            report.error(path, f"unresolved pattern grammar {sup.pattern!r}")

    genspec_graph: dict[str, list[str]] = {nid: [] for nid in kb.nodes}
    for i, link in enumerate(kb.genspec_links):
        path = f"genspec[{i}]"
        ok = True
        for nid in (link.subclass_node_id, link.superclass_node_id):
            if nid not in kb.nodes:
                report.error(path, f"unresolved node id {nid!r}")
                ok = False
        if ok:
            genspec_graph[link.subclass_node_id].append(link.superclass_node_id)
    cycle = _find_cycle(genspec_graph)
    if cycle:
        report.error("genspec", "cycle in generalization links: " + " -> ".join(cycle))

    always: dict[str, list[str]] = {}
    for i, rule in enumerate(kb.precedence_rules):
        path = f"precedence[{i}]"
        for side in (rule.winner, rule.loser):
            if side not in kb.nodes and side not in kinds:
                report.error(path, f"unresolved node id or kind {side!r}")
        if rule.condition is OverlapCondition.ALWAYS:
            always.setdefault(rule.winner, []).append(rule.loser)
            always.setdefault(rule.loser, [])
    cycle = _find_cycle(always)
    if cycle:
        report.error("precedence", "cycle in always-precedence rules: " + " -> ".join(cycle))

    acceptor_graph: dict[str, list[str]] = {}
    for nid, node in kb.nodes.items():
        grammar = kb.grammars.get(node.grammar_id) if node.grammar_id else None
        if grammar is not None and grammar.recursive:
            acceptor_graph[nid] = []
            continue
        targets: set[str] = set()
        for slot in node.slots:
            for acc in slot.accepted:
                targets |= _acceptor_targets(kb, acc)
        acceptor_graph[nid] = sorted(targets)
    cycle = _find_cycle(acceptor_graph)
    if cycle:
        report.error("nodes", "cycle in slot composition without a recursive grammar: " + " -> ".join(cycle))

    # compile failures not already explained above
    for gid in kb.grammars:
        if gid not in kb.compiled:
            from ..grammar import compile_grammar

            try:
                compile_grammar(kb.grammars[gid], kb)
            except UnknownReference as exc:
                msg = f"does not compile: {exc}"
                if not any(f.path.startswith(f"grammars[{gid}]") for f in report.errors):
                    report.error(f"grammars[{gid}]", msg)

    _lint_ambiguity(kb, report)
    _lint_reachability(kb, report)
    return report


def _lint_ambiguity(kb: KnowledgeBase, report: ValidationReport) -> None:
    seen: dict[tuple, list[str]] = {}
    for link in kb.activation_links:
        if link.trigger_kind is not TriggerKind.ANCHORED or link.trigger is None:
            continue
        key = (repr(link.trigger), link.context_filter)
        targets = seen.setdefault(key, [])
        if link.target_node_id not in targets:
            targets.append(link.target_node_id)
    for (trigger, _), targets in seen.items():
        for i, a in enumerate(targets):
            for b in targets[i + 1:]:
                if a not in kb.nodes or b not in kb.nodes:
                    continue
                if _is_a_safe(kb, a, b) or _is_a_safe(kb, b, a):
                    continue
                if kb.nodes[a].layer != kb.nodes[b].layer:
                    continue
                ruled = any(
                    (_matches_rule_side(kb, r.winner, a) and _matches_rule_side(kb, r.loser, b))
                    or (_matches_rule_side(kb, r.winner, b) and _matches_rule_side(kb, r.loser, a))
                    for r in kb.precedence_rules
                )
                if not ruled:
                    report.warn(
                        "activation",
                        f"same-span ambiguity: {a!r} and {b!r} share trigger {trigger} with no precedence rule",
                    )


def _lint_reachability(kb: KnowledgeBase, report: ValidationReport) -> None:
    reachable = {link.target_node_id for link in kb.activation_links}
    for node in kb.nodes.values():
        reachable.update(node.attribute_node_ids)
    for nid in kb.nodes:
        if nid not in reachable:
            report.warn(f"nodes[{nid}]", "unreachable: no activation link or attribute cascade targets this node")
