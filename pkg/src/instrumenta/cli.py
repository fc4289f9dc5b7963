"""Command-line entry point.

Exit codes: 0 verified (or success), 1 an assertion can fail,
2 inconclusive, 3 usage, parse or type errors.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import lang
from .instrumentation import (BOT, EMPTY, InvalidSelection, OperatorFileError, UnknownOperator,
                              compose, full_selection, instrument, instrumentation_space,
                              load_operator, operator_for_program, space_size)
from .instrumentation.conditions import check_operator_conditions
from .lang import ast as A
from .lang.pretty import stmt_lines
from .monoids import NotCancellative
from .oracle import (AutoOracle, BoundedDomain, BoundedOracle, ChcOracle, UnsupportedNode,
                     encode_chc, trace_to_json)
from .search import Inconclusive, Refuted, SearchConfig, Verified, format_selection, log_writer, search
from .semantics import (AssertFailed, Blocked, BudgetExceeded, RunError, Scripted, Seeded,
                        Terminated, run, value_to_json)

EXIT_OK, EXIT_INCORRECT, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers

def _interval(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    try:
        out = (int(lo), int(hi))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in {text!r}") from None
    if out[0] > out[1]:
        raise argparse.ArgumentTypeError(f"empty interval {text!r}")
    return out


def _domain(args) -> BoundedDomain:
    default = (-3, 3)
    per_site = {}
    for spec in args.nondet_range or []:
        name, eq, rng = spec.rpartition("=")
        interval = _interval(rng)
        if eq:
            per_site[int(name) if name.isdigit() else name] = interval
        else:
            default = interval
    return BoundedDomain(default=default, per_site=per_site, array_len=args.array_len,
                         budget=args.budget, max_paths=args.max_paths,
                         exhaustive=not args.sample, samples=args.sample or 200, seed=args.seed)


def load_program(path: str, *, fresh_names: bool = False) -> A.Program:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as ex:
        raise UsageError(f"cannot read {path}: {ex.strerror}") from None
    try:
        return lang.load(text, fresh_names=fresh_names)
    except lang.ParseError as ex:
        raise UsageError(f"{path}: {ex}") from None
    except lang.IllTyped as ex:
        raise UsageError(f"{path}: type errors:\n" + "\n".join(f"  {e}" for e in ex.errors)) from None


def parse_lambda(text: str) -> A.Lambda:
    try:
        e = lang.parse_expr(f"\\forall(q, 0, 0, {text})")
    except lang.ParseError as ex:
        raise UsageError(f"bad predicate {text!r}: {ex}") from None
    return e.pred


def _program_ops(p: A.Program) -> list[str]:
    kinds = []
    for s in A.walk(p.body):
        for e in A.stmt_exprs(s):
            for x in A.subexprs(e):
                k = x.kind if isinstance(x, A.Quant) else x.name if isinstance(x, A.Aggregate) else None
                if k and k not in kinds:
                    kinds.append(k)
    return kinds


def resolve_operator(p: A.Program, names: list[str] | None, pred_text: str | None):
    """Builtin names or ``.op.toml`` paths, composed left to right; with
    none given, one builtin per aggregate kind occurring in ``p``."""
    pred = parse_lambda(pred_text) if pred_text else None
    names = names if names else _program_ops(p)
    op = EMPTY
    for name in names:
        try:
            if name.endswith(".toml") or Path(name).is_file():
                nxt = load_operator(name, pred)
            else:
                nxt = operator_for_program(name, p, pred)
        except (UnknownOperator, KeyError):
            raise UsageError(f"unknown operator {name!r}") from None
        except (OperatorFileError, NotCancellative, ValueError, OSError, lang.ParseError) as ex:
            raise UsageError(f"operator {name}: {ex}") from None
        op = compose(op, nxt)
    return op


def _prepare(p: A.Program) -> A.Program:
    return p if lang.is_normal(p) else lang.normalize(p)


def _stmt_text(p: A.Program, pid: int) -> str:
    s = p.points().get(pid)
    if s is None:
        return "?"
    if isinstance(s, A.While):
        return f"while ({lang.expr_str(s.cond)})"
    if isinstance(s, A.If):
        return f"if ({lang.expr_str(s.cond)})"
    return stmt_lines(s)[0].strip()


def _print_trace(p: A.Program, trace, out):
    for k, st in enumerate(trace):
        vals = ", ".join(f"{n}={value_to_json(v)}" for n, v in sorted(st.vars.items()))
        out.write(f"  {k:3d}  [{st.point}] {_stmt_text(p, st.point):<32} {vals}\n")


def _emit_json(obj, out):
    out.write(json.dumps(obj, indent=2, sort_keys=False) + "\n")


# ---------------------------------------------------------------- commands

def cmd_check(args, out) -> int:
    p = _prepare(load_program(args.file))
    op = resolve_operator(p, args.op, args.pred)
    dom = _domain(args)
    bounded = BoundedOracle(dom)
    chc = ChcOracle(args.solver_cmd, args.timeout)
    oracle = {"bounded": bounded, "chc": chc, "auto": AutoOracle(bounded, chc)}[args.oracle]
    log_file = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        cfg = SearchConfig(strategy=args.strategy, max_budget=args.max_budget,
                           max_operators=args.max_operators, deadline=args.deadline,
                           jobs=args.jobs, log=log_writer(log_file) if log_file else None)
        res = search(p, op, oracle, cfg)
    finally:
        if log_file:
            log_file.close()
    if args.plot:
        from .report import plot_search_progress
        plot_search_progress(res.log, args.plot, title=Path(args.file).name)
    space = instrumentation_space(p, op)
    if args.format == "json":
        doc = {"result": res.kind, "operator": op.name, "oracle": args.oracle, "seed": args.seed,
               "iterations": res.iterations, "space": space_size(space)}
        if isinstance(res, Verified):
            doc["selection"] = format_selection(res.selection)
            doc["witness"] = None if res.witness is None else \
                {str(k): lang.expr_str(f) for k, f in res.witness.items()}
        elif isinstance(res, Refuted):
            doc["point"] = res.point
            doc["trace"] = trace_to_json(res.trace)
        else:
            doc["reason"] = res.reason
        _emit_json(doc, out)
    else:
        out.write(f"{res.kind} after {res.iterations} oracle call(s); "
                  f"operator {op.name}, space {space_size(space)}, seed {args.seed}\n")
        if isinstance(res, Verified):
            out.write("selection:\n")
            for pid, choice in sorted(res.selection.items()):
                out.write(f"  [{pid}] {_stmt_text(p, pid):<32} {'bot' if choice is BOT else choice}\n")
            if res.witness:
                out.write("witness:\n")
                for pid, f in sorted(res.witness.items()):
                    out.write(f"  loop [{pid}]: {lang.expr_str(f)}\n")
        elif isinstance(res, Refuted):
            out.write(f"assertion [{res.point}] fails; trace:\n")
            _print_trace(p, res.trace, out)
        else:
            out.write(f"reason: {res.reason}\n")
    return {Verified: EXIT_OK, Refuted: EXIT_INCORRECT, Inconclusive: EXIT_INCONCLUSIVE}[type(res)]


def _read_selection(path: str, space: dict) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as ex:
        raise UsageError(f"selection file {path}: {ex}") from None
    if not isinstance(raw, dict):
        raise UsageError("selection file must hold an object {point: rule}")
    sel = {}
    for k, v in raw.items():
        if not str(k).lstrip("-").isdigit():
            raise UsageError(f"selection key {k!r} is not a point id")
        sel[int(k)] = None if v in (None, "bot") else v
    return sel


def cmd_instrument(args, out) -> int:
    p = _prepare(load_program(args.file))
    op = resolve_operator(p, args.op, args.pred)
    space = instrumentation_space(p, op)
    if args.list_space:
        if args.format == "json":
            _emit_json({"operator": op.name, "size": space_size(space),
                        "points": [{"point": pid, "statement": _stmt_text(p, pid),
                                    "choices": ["bot" if c is BOT else c for c in cs]}
                                   for pid, cs in sorted(space.items())]}, out)
        else:
            out.write(f"operator {op.name}: {len(space)} rewritable point(s), "
                      f"{space_size(space)} selection(s)\n")
            for pid, cs in sorted(space.items()):
                out.write(f"  [{pid}] {_stmt_text(p, pid):<32} "
                          f"{', '.join('bot' if c is BOT else c for c in cs)}\n")
        return EXIT_OK
    if args.full and args.selection:
        raise UsageError("--full and --selection are exclusive")
    sel = full_selection(space) if args.full else \
        _read_selection(args.selection, space) if args.selection else {}
    try:
        ip = instrument(p, op, sel)
    except InvalidSelection as ex:
        raise UsageError(f"invalid selection: {ex}") from None
    text = lang.pretty(ip.program)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    if args.pointmap:
        doc = {"operator": ip.operator.name, "selection": format_selection(ip.selection),
               "pointMap": {str(k): v for k, v in sorted(ip.point_map.items())},
               "owner": {str(k): v for k, v in sorted(ip.owner.items())},
               "regions": {str(k): sorted(v) for k, v in sorted(ip.regions.items())},
               "addedAsserts": sorted(ip.added_asserts)}
        Path(args.pointmap).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_run(args, out) -> int:
    p = load_program(args.file, fresh_names=True)
    if args.script is not None:
        try:
            nd = Scripted.parse(args.script)
        except ValueError:
            raise UsageError(f"bad script {args.script!r}; expected name=value,...") from None
    else:
        lo, hi = _interval(args.range)
        nd = Seeded(args.seed, lo, hi)
    res = run(p, nd, args.budget)
    for k, st in enumerate(res.trace):
        out.write(json.dumps({"step": k, "point": st.point,
                              "vars": {n: value_to_json(v) for n, v in st.vars.items()}}) + "\n")
    final = {"outcome": type(res).__name__}
    match res:
        case Terminated(final=env):
            final["final"] = {n: value_to_json(v) for n, v in env.items()}
        case AssertFailed(_, point) | Blocked(point):
            final["point"] = point
        case RunError(kind, point):
            final.update(kind=kind, point=point)
    out.write(json.dumps(final) + "\n")
    if isinstance(res, AssertFailed):
        return EXIT_INCORRECT
    if isinstance(res, (BudgetExceeded, RunError)):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_export_chc(args, out) -> int:
    p = load_program(args.file, fresh_names=True)
    if args.op:
        p = _prepare(p)
        op = resolve_operator(p, args.op, args.pred)
        p = instrument(p, op, full_selection(instrumentation_space(p, op))).program
    try:
        script = encode_chc(p)
    except UnsupportedNode as ex:
        raise UsageError(f"cannot encode {args.file}: {ex}") from None
    if args.output:
        Path(args.output).write_text(script.text, encoding="utf-8")
    else:
        out.write(script.text)
    return EXIT_OK


def cmd_check_operator(args, out) -> int:
    pred = parse_lambda(args.pred) if args.pred else None
    name = args.operator
    try:
        if name.endswith(".toml") or Path(name).is_file():
            op = load_operator(name, pred)
        else:
            from .instrumentation import builtin_operator
            if pred is None and name in ("forall", "exists", "numof"):
                pred = parse_lambda("\\lambda(x, i).(x == i)")
            op = builtin_operator(name, pred)
    except (UnknownOperator, KeyError):
        raise UsageError(f"unknown operator {name!r}") from None
    except (OperatorFileError, NotCancellative, ValueError, OSError, lang.ParseError) as ex:
        raise UsageError(f"operator {name}: {ex}") from None
    rep = check_operator_conditions(op, args.samples, _interval(args.range), args.seed)
    if args.format == "json":
        _emit_json(rep.to_json(), out)
    else:
        out.write(f"operator {op.name}: {'pass' if rep.passed else 'FAIL'} "
                  f"({args.samples} samples per rule, seed {args.seed})\n")
        for r in rep.results:
            where = f"{r.rule}/" if r.rule else ""
            out.write(f"  {'ok  ' if r.passed else 'FAIL'} {where}{r.condition}"
                      f"{'  ' + r.detail if r.detail else ''}\n")
            if r.counterexample is not None:
                out.write(f"       state: {json.dumps(r.counterexample)}\n")
    return EXIT_OK if rep.passed else EXIT_INCORRECT


def cmd_report(args, out) -> int:
    from .report import plot_search_progress, read_log
    try:
        log = read_log(args.log)
    except (OSError, json.JSONDecodeError, KeyError) as ex:
        raise UsageError(f"cannot read log {args.log}: {ex}") from None
    path = plot_search_progress(log, args.output, title=args.title)
    out.write(f"wrote {path}\n")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="instrumenta", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, ops=True):
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--seed", type=int, default=0)
        if ops:
            sp.add_argument("--op", action="append", metavar="NAME|FILE",
                            help="builtin operator or .op.toml file; repeat to compose")
            sp.add_argument("--pred", metavar="LAMBDA", help="predicate, e.g. '\\lambda(x, i).(x == i)'")

    c = sub.add_parser("check", help="search for an instrumentation the oracle verifies")
    c.add_argument("file")
    common(c)
    c.add_argument("--oracle", choices=("bounded", "chc", "auto"), default="bounded")
    c.add_argument("--nondet-range", action="append", metavar="[SITE=]LO:HI",
                   help="interval for nondet draws, default -3:3; SITE is a variable or point id")
    c.add_argument("--array-len", type=int, default=3, help="longest nondet array enumerated")
    c.add_argument("--budget", type=int, default=10_000, help="steps per path")
    c.add_argument("--max-paths", type=int, default=1_000_000)
    c.add_argument("--sample", type=int, default=0, metavar="N",
                   help="run N random paths instead of all of them")
    c.add_argument("--solver-cmd", help="Horn solver command (default: $INSTRUMENTA_SOLVER)")
    c.add_argument("--timeout", type=float, default=60.0, help="solver seconds per call")
    c.add_argument("--strategy", choices=("all-first", "lex"), default="all-first")
    c.add_argument("--max-budget", type=int, default=4, help="largest budget factor for rechecks")
    c.add_argument("--max-operators", type=int, default=1, help="operator copies escalation may use")
    c.add_argument("--deadline", type=float, help="overall seconds")
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--log", metavar="FILE", help="write the search progress as JSON lines")
    c.add_argument("--plot", metavar="FILE", help="render the search progress to an image")
    c.set_defaults(func=cmd_check)

    i = sub.add_parser("instrument", help="apply an operator under a selection")
    i.add_argument("file")
    common(i)
    i.add_argument("--selection", metavar="FILE", help='JSON object {"point": "rule" | "bot"}')
    i.add_argument("--full", action="store_true", help="rewrite every rewritable point")
    i.add_argument("--list-space", action="store_true", help="print the rewritable points and choices")
    i.add_argument("-o", "--output", metavar="FILE")
    i.add_argument("--pointmap", metavar="FILE", help="write the point map as JSON")
    i.set_defaults(func=cmd_instrument)

    r = sub.add_parser("run", help="execute once and print the trace as JSON lines")
    r.add_argument("file")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--script", metavar="N=3,...", help="values for nondet sites by variable")
    r.add_argument("--range", default="-8:8", metavar="LO:HI", help="seeded draws interval")
    r.add_argument("--budget", type=int, default=100_000)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("export-chc", help="write the Horn clauses of a program")
    e.add_argument("file")
    common(e)
    e.add_argument("-o", "--output", metavar="FILE")
    e.set_defaults(func=cmd_export_chc)

    k = sub.add_parser("check-operator", help="test an operator's correctness conditions")
    k.add_argument("operator", metavar="NAME|FILE")
    k.add_argument("--format", choices=("text", "json"), default="text")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--pred", metavar="LAMBDA")
    k.add_argument("--samples", type=int, default=10_000)
    k.add_argument("--range", default="-4:4", metavar="LO:HI")
    k.set_defaults(func=cmd_check_operator)

    g = sub.add_parser("report", help="plot a search progress log")
    g.add_argument("log")
    g.add_argument("-o", "--output", required=True, metavar="FILE")
    g.add_argument("--title")
    g.set_defaults(func=cmd_report)
    return ap


_RANGE_FLAGS = ("--nondet-range", "--range")
_RANGE_VALUE = re.compile(r"^([\w$]+=)?-?\d+:-?\d+$")


def _glue_ranges(argv: list[str]) -> list[str]:
    """argparse takes ``-3:3`` for an option; bind it to its flag."""
    out: list[str] = []
    k = 0
    while k < len(argv):
        if argv[k] in _RANGE_FLAGS and k + 1 < len(argv) and _RANGE_VALUE.match(argv[k + 1]):
            out.append(f"{argv[k]}={argv[k + 1]}")
            k += 2
        else:
            out.append(argv[k])
            k += 1
    return out


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_ranges(argv))
    try:
        return args.func(args, out)
    except UsageError as ex:
        print(f"instrumenta: {ex}", file=sys.stderr)
        return EXIT_USAGE
    except argparse.ArgumentTypeError as ex:
        print(f"instrumenta: {ex}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
