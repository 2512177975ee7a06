"""Leveled token and hypothesis records shared by the query processor,
grammar runtime and parse engine."""

from __future__ import annotations

from dataclasses import dataclass, field

from .kb.model import TriggerKind


@dataclass(frozen=True)
class NodeInstance:
    node_id: str
    # slot name -> ids of the tokens filling it
    slots: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"node": self.node_id, "slots": {k: list(v) for k, v in sorted(self.slots.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> NodeInstance:
        return cls(d["node"], {k: tuple(v) for k, v in d["slots"].items()})


@dataclass(frozen=True)
class Token:
    id: int
    level: int
    char_span: tuple[int, int]
    text: str
    l1_class: str | None = None
    pos: str | None = None
    node_instance: NodeInstance | None = None
    children: tuple[int, ...] = ()
    residual: bool = False

    @property
    def node_id(self) -> str | None:
        return self.node_instance.node_id if self.node_instance else None

    @property
    def features(self) -> tuple[str | None, str | None]:
        return (self.l1_class, self.pos)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "level": self.level,
            "span": list(self.char_span),
            "text": self.text,
            "l1_class": self.l1_class,
            "pos": self.pos,
            "node": self.node_instance.to_dict() if self.node_instance else None,
            "children": list(self.children),
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Token:
        return cls(
            id=d["id"],
            level=d["level"],
            char_span=tuple(d["span"]),
            text=d["text"],
            l1_class=d["l1_class"],
            pos=d["pos"],
            node_instance=NodeInstance.from_dict(d["node"]) if d["node"] else None,
            children=tuple(d["children"]),
            residual=d["residual"],
        )


@dataclass(frozen=True)
class Hypothesis:
    id: int
    target_node_id: str
    trigger_tokens: tuple[int, ...]
    trigger_kind: TriggerKind
    prior: float = 1.0
    # node whose activation produced a cascading hypothesis
    cascaded_from: str | None = None

    def key(self) -> tuple[str, frozenset[int]]:
        return (self.target_node_id, frozenset(self.trigger_tokens))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "target": self.target_node_id,
            "triggers": list(self.trigger_tokens),
            "kind": self.trigger_kind.value,
            "prior": self.prior,
            "cascaded_from": self.cascaded_from,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Hypothesis:
        return cls(
            id=d["id"],
            target_node_id=d["target"],
            trigger_tokens=tuple(d["triggers"]),
            trigger_kind=TriggerKind(d["kind"]),
            prior=d["prior"],
            cascaded_from=d["cascaded_from"],
        )
