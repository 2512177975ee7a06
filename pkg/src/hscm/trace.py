"""Parse trace records and their JSON form.

The JSON layout is versioned (``trace_version``).  Serialization is
canonical (sorted keys, compact separators) so that re-reading a trace and
writing it back gives identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .grammar import MatchResult
from .preprocess import FunctionalToken, SurfaceToken
from .tokens import Hypothesis, Token

TRACE_VERSION = 1


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class TestReport:
    hypothesis_id: int
    target_node_id: str
    success: bool
    matches: tuple[MatchResult, ...] = ()
    failure_reason: str | None = None
    grammar_id: str | None = None

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis_id,
            "target": self.target_node_id,
            "success": self.success,
            "matches": [m.to_dict() for m in self.matches],
            "failure_reason": self.failure_reason,
            "grammar": self.grammar_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TestReport:
        return cls(
            d["hypothesis"],
            d["target"],
            d["success"],
            tuple(MatchResult.from_dict(m) for m in d["matches"]),
            d["failure_reason"],
            d["grammar"],
        )


@dataclass(frozen=True)
class Decision:
    """Adjudication outcome for one distinct successful match."""

    match_id: int
    node_id: str
    match: MatchResult
    hypotheses: tuple[int, ...]
    status: str  # accepted | rejected | unresolved
    reason: str
    against: int | None = None

    def to_dict(self) -> dict:
        return {
            "match": self.match_id,
            "node": self.node_id,
            "result": self.match.to_dict(),
            "hypotheses": list(self.hypotheses),
            "status": self.status,
            "reason": self.reason,
            "against": self.against,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Decision:
        return cls(
            d["match"],
            d["node"],
            MatchResult.from_dict(d["result"]),
            tuple(d["hypotheses"]),
            d["status"],
            d["reason"],
            d["against"],
        )


@dataclass(frozen=True)
class LevelRecord:
    level: int
    input: tuple[Token, ...]
    hypotheses: tuple[Hypothesis, ...]
    reports: tuple[TestReport, ...]
    decisions: tuple[Decision, ...]
    output: tuple[Token, ...]
    fixed_point: bool
    suppressed: tuple[Hypothesis, ...] = ()
    specialized: tuple[Hypothesis, ...] = ()
    skipped: tuple[Hypothesis, ...] = ()

    def accepted(self) -> list[Decision]:
        return [d for d in self.decisions if d.status == "accepted"]

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "input": [t.to_dict() for t in self.input],
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "suppressed": [h.to_dict() for h in self.suppressed],
            "specialized": [h.to_dict() for h in self.specialized],
            "skipped": [h.to_dict() for h in self.skipped],
            "reports": [r.to_dict() for r in self.reports],
            "decisions": [d.to_dict() for d in self.decisions],
            "output": [t.to_dict() for t in self.output],
            "fixed_point": self.fixed_point,
        }

    @classmethod
    def from_dict(cls, d: dict) -> LevelRecord:
        return cls(
            level=d["level"],
            input=tuple(Token.from_dict(t) for t in d["input"]),
            hypotheses=tuple(Hypothesis.from_dict(h) for h in d["hypotheses"]),
            reports=tuple(TestReport.from_dict(r) for r in d["reports"]),
            decisions=tuple(Decision.from_dict(x) for x in d["decisions"]),
            output=tuple(Token.from_dict(t) for t in d["output"]),
            fixed_point=d["fixed_point"],
            suppressed=tuple(Hypothesis.from_dict(h) for h in d["suppressed"]),
            specialized=tuple(Hypothesis.from_dict(h) for h in d["specialized"]),
            skipped=tuple(Hypothesis.from_dict(h) for h in d["skipped"]),
        )


@dataclass(frozen=True)
class ParseTrace:
    sentence: str
    context: tuple[str, ...] = ()
    surface: tuple[SurfaceToken, ...] = ()
    functional: tuple[FunctionalToken, ...] = ()
    levels: tuple[LevelRecord, ...] = ()
    frames: tuple[dict, ...] = ()
    residuals: tuple[dict, ...] = ()
    final_tokens: tuple[Token, ...] = field(default=())

    def level(self, k: int) -> LevelRecord | None:
        for rec in self.levels:
            if rec.level == k:
                return rec
        return None

    def all_tokens(self) -> dict[int, Token]:
        out: dict[int, Token] = {}
        for t in self.final_tokens:
            out[t.id] = t
        for rec in self.levels:
            for t in rec.input + rec.output:
                out[t.id] = t
        return out

    def to_dict(self) -> dict:
        return {
            "trace_version": TRACE_VERSION,
            "sentence": self.sentence,
            "context": list(self.context),
            "surface": [t.to_dict() for t in self.surface],
            "functional": [t.to_dict() for t in self.functional],
            "levels": [r.to_dict() for r in self.levels],
            "final_tokens": [t.to_dict() for t in self.final_tokens],
            "frames": list(self.frames),
            "residuals": list(self.residuals),
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def frames_dict(self) -> dict:
        return {"sentence": self.sentence, "frames": list(self.frames), "residuals": list(self.residuals)}

    @classmethod
    def from_dict(cls, d: dict) -> ParseTrace:
        version = d.get("trace_version")
        if version != TRACE_VERSION:
            raise ValueError(f"unsupported trace_version {version!r}")
        return cls(
            sentence=d["sentence"],
            context=tuple(d["context"]),
            surface=tuple(SurfaceToken.from_dict(t) for t in d["surface"]),
            functional=tuple(FunctionalToken.from_dict(t) for t in d["functional"]),
            levels=tuple(LevelRecord.from_dict(r) for r in d["levels"]),
            frames=tuple(d["frames"]),
            residuals=tuple(d["residuals"]),
            final_tokens=tuple(Token.from_dict(t) for t in d["final_tokens"]),
        )

    @classmethod
    def from_json(cls, text: str) -> ParseTrace:
        return cls.from_dict(json.loads(text))
