"""Command-line front end: ``hscm validate|parse|query|version``.

Exit status:

* 0: success
* 1: the KB has validation errors (or warnings under ``--strict``), a query
  names an unknown node, or two precedence instances do not overlap
* 2: malformed KB document (with line/column when known), unreadable file,
  or malformed command-line arguments
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .engine import parse
from .errors import EncodingError, IndexOutOfRange, NotInConflict, SchemaError, UnknownNode, ValidationError
from .kb.loader import load_kb
from .kb.query import Candidate, compare, query_compatibility, query_hypotheses, query_unknown_assignment
from .kb.validate import validate_kb
from .preprocess import preprocess
from .tokens import Token
from .trace import dumps

FORMATS = ("trace-json", "frames-json", "summary-text")
BUILTIN_KB = "builtin:radiology"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--kb", default=default, help=f"knowledge base JSON file ({BUILTIN_KB} for the bundled pack)")
    parser.add_argument("--format", choices=FORMATS, default=default)
    parser.add_argument("--context", action="append", default=default, metavar="K=V", help="context profile entry (repeatable)")
    parser.add_argument("--strict", action="store_true", default=default, help="treat validation warnings as failures")
    parser.add_argument("--lenient", action="store_true", default=default, help="downgrade unknown KB keys to warnings")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hscm", description="Knowledge-driven semantic parser.")
    _common(parser, None)
    # the same flags are accepted after the subcommand; SUPPRESS keeps the
    # subparser from overwriting values given before it
    shared = _Parser(add_help=False)
    _common(shared, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("validate", parents=[shared], help="load and lint a knowledge base")

    p = sub.add_parser("parse", parents=[shared], help="parse sentences, one per line")
    p.add_argument("sentence", nargs="*", help="sentences to parse (default: read --input or stdin)")
    p.add_argument("--input", help="file with one sentence per line")
    p.add_argument("--jobs", type=int, default=1, help="parse lines concurrently (output order is preserved)")

    q = sub.add_parser("query", parents=[shared], help="run one knowledge-base query")
    q.add_argument("kind", choices=("hypotheses", "unknown", "precedence", "compatibility"))
    q.add_argument("args", nargs="*", metavar="KEY=VALUE")

    sub.add_parser("version", help="print the version")
    return parser


def _load(args):
    if not args.kb:
        raise UsageError("--kb is required for this command")
    if args.kb == BUILTIN_KB:
        from .pack import kb_path

        data = kb_path().read_bytes()
    else:
        try:
            data = Path(args.kb).read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read {args.kb}: {exc.strerror or exc}") from None
    return load_kb(data, strict=not args.lenient, validate=False)


def _schema_message(exc: SchemaError) -> str:
    if exc.line is not None:
        return f"schema error at line {exc.line}, column {exc.column}: {exc}"
    return f"schema error: {exc}"


def cmd_validate(args, out, err) -> int:
    kb = _load(args)
    report = validate_kb(kb)
    if args.format in ("trace-json", "frames-json"):
        out.write(dumps(report.to_dict()) + "\n")
    else:
        out.write(report.format() + "\n")
    if report.errors or (args.strict and report.warnings):
        return EXIT_FAIL
    return EXIT_OK


def _read_lines(args, stdin) -> list[bytes]:
    if args.sentence:
        return [s.encode("utf-8", "surrogateescape") for s in args.sentence]
    if args.input:
        try:
            data = Path(args.input).read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    else:
        data = stdin.read()
    return data.splitlines()


def summary_text(trace) -> str:
    lines = [f"sentence: {trace.sentence}", "level  input  output  accepted"]
    lines.append(f"L0     {len(trace.surface):<5}")
    lines.append(f"L1     {len(trace.functional):<5}")
    for rec in trace.levels:
        mark = "  (fixed point)" if rec.fixed_point else ""
        lines.append(f"{rec.level:<6} {len(rec.input):<6} {len(rec.output):<7} {len(rec.accepted())}{mark}")
    frames = ", ".join(f["node"] for f in trace.frames) or "-"
    lines.append(f"frames: {frames}")
    lines.append(f"residuals: {len(trace.residuals)}")
    return "\n".join(lines)


def cmd_parse(args, out, err, stdin) -> int:
    kb = _load(args)
    report = validate_kb(kb)
    if report.errors:
        err.write("knowledge base is invalid:\n" + report.format() + "\n")
        return EXIT_FAIL
    fmt = args.format or "trace-json"
    context = tuple(args.context or ())
    lines = _read_lines(args, stdin)

    def one(item):
        lineno, raw = item
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            return {"line": lineno, "error": f"input is not valid UTF-8: {exc}"}
        try:
            trace = parse(kb, text, context)
        except EncodingError as exc:
            return {"line": lineno, "error": str(exc)}
        if fmt == "trace-json":
            return dumps(trace.to_dict())
        if fmt == "frames-json":
            return dumps(trace.frames_dict())
        return summary_text(trace)

    items = list(enumerate(lines, 1))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(item) for item in items]
    for res in results:
        if isinstance(res, dict):
            if fmt == "summary-text":
                out.write(f"error (line {res['line']}): {res['error']}\n")
            else:
                out.write(dumps(res) + "\n")
        else:
            out.write(res + "\n")
    return EXIT_OK


def _kv(pairs: list[str], required: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"expected KEY=VALUE, got {item!r}")
        out[key] = value
    missing = [k for k in required if k not in out]
    extra = sorted(set(out) - set(required))
    if missing or extra:
        raise UsageError(f"expected arguments {', '.join(k + '=...' for k in required)}")
    return out


def _instance(spec: str) -> Candidate:
    """``NODE@START:END`` or ``NODE@START:END:TRIGGER`` (token indices)."""
    node, sep, rng = spec.rpartition("@")
    parts = rng.split(":")
    if not sep or not node or len(parts) not in (2, 3):
        raise UsageError(f"expected NODE@START:END[:TRIGGER], got {spec!r}")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"non-integer offsets in {spec!r}") from None
    start, end = nums[0], nums[1]
    trigger = nums[2] if len(nums) == 3 else start
    if not 0 <= start < end:
        raise UsageError(f"empty or negative range in {spec!r}")
    return Candidate(node, start, end, trigger)


def _level1_tokens(kb, text: str) -> list[Token]:
    _, functional = preprocess(kb, text)
    return [Token(i, 1, f.span, f.text, f.l1_class, f.pos) for i, f in enumerate(functional)]


def cmd_query(args, out, err) -> int:
    kb = _load(args)
    kind = args.kind
    if kind == "hypotheses":
        a = _kv(args.args, ("text",))
        tokens = _level1_tokens(kb, a["text"])
        hyps = query_hypotheses(kb, tokens, args.context or ())
        result = {"tokens": [t.text for t in tokens], "hypotheses": [h.to_dict() for h in hyps]}
    elif kind == "unknown":
        a = _kv(args.args, ("text", "index"))
        try:
            index = int(a["index"])
        except ValueError:
            raise UsageError("index must be an integer") from None
        tokens = _level1_tokens(kb, a["text"])
        try:
            ranked = query_unknown_assignment(kb, tokens, index)
        except IndexOutOfRange as exc:
            raise UsageError(str(exc)) from None
        result = {"token": tokens[index].text, "candidates": [{"class": c, "score": s} for c, s in ranked]}
    elif kind == "precedence":
        a = _kv(args.args, ("a", "b"))
        ca, cb = _instance(a["a"]), _instance(a["b"])
        for c in (ca, cb):
            kb.node(c.node_id)
        verdict, basis = compare(kb, ca, cb)
        result = {"verdict": verdict.value, "basis": basis}
    else:
        a = _kv(args.args, ("orphan", "anchor"))
        result = {"slot": query_compatibility(kb, a["orphan"], a["anchor"])}
    out.write(dumps(result) + "\n")
    return EXIT_OK


def main(argv=None, *, stdin=None, stdout=None, stderr=None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    if stdin is None:
        stdin = sys.stdin.buffer
    try:
        args = build_parser().parse_args(argv)
        if args.command == "version":
            out.write(f"hscm {__version__}\n")
            return EXIT_OK
        if args.command == "validate":
            return cmd_validate(args, out, err)
        if args.command == "parse":
            return cmd_parse(args, out, err, stdin)
        return cmd_query(args, out, err)
    except UsageError as exc:
        err.write(f"hscm: {exc}\n")
        return EXIT_USAGE
    except SchemaError as exc:
        err.write(f"hscm: {_schema_message(exc)}\n")
        return EXIT_USAGE
    except (UnknownNode, NotInConflict, ValidationError) as exc:
        err.write(f"hscm: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
