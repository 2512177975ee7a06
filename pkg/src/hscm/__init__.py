"""Knowledge-driven semantic parsing with a hierarchical semantic
compositional model (HSCM).

Typical use::

    from hscm import parse, pack_contents

    trace = parse(pack_contents(), "There is a 5.5cm mass in the left upper lobe.")
    trace.frames          # grounded frame instances
    trace.to_json()       # full level-by-level trace
"""

from .engine import ParseState, adjudicate, build_next, generate, parse, run_level, test
from .errors import (
    EncodingError,
    HSCMError,
    IndexOutOfRange,
    KBInvalid,
    NotInConflict,
    SchemaError,
    UnknownNode,
    UnknownReference,
    ValidationError,
)
from .grammar import MatchResult, compile_grammar, match_at, match_floating
from .kb import (
    load_kb,
    query_compatibility,
    query_hypotheses,
    query_precedence,
    query_unknown_assignment,
    validate_kb,
)
from .pack import golden_cases, pack_contents
from .preprocess import lexical_analyze, preprocess, tokenize_l0
from .trace import ParseTrace

__version__ = "0.1.0"

__all__ = [
    "EncodingError",
    "HSCMError",
    "IndexOutOfRange",
    "KBInvalid",
    "MatchResult",
    "NotInConflict",
    "ParseState",
    "ParseTrace",
    "SchemaError",
    "UnknownNode",
    "UnknownReference",
    "ValidationError",
    "adjudicate",
    "build_next",
    "compile_grammar",
    "generate",
    "golden_cases",
    "lexical_analyze",
    "load_kb",
    "match_at",
    "match_floating",
    "pack_contents",
    "parse",
    "preprocess",
    "query_compatibility",
    "query_hypotheses",
    "query_precedence",
    "query_unknown_assignment",
    "run_level",
    "test",
    "tokenize_l0",
    "validate_kb",
]
