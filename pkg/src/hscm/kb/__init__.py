"""Knowledge base: data model, loader, validator and query processor."""

from .loader import TOP_LEVEL_KEYS, build_kb, load_kb
from .model import *  # noqa: F401,F403
from .query import (
    Candidate,
    Precedence,
    collect_hypotheses,
    compare,
    query_compatibility,
    query_hypotheses,
    query_precedence,
    query_unknown_assignment,
    superclass_chain,
)
from .validate import Finding, ValidationReport, validate_kb
