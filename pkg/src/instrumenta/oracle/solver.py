"""Running an external Horn solver and reading its answer.

The solver is started as ``<cmd> <file.smt2>``; the first of ``sat``,
``unsat`` or ``unknown`` on stdout decides the verdict and, after
``sat``, the ``(get-model)`` output is read back into formulas over the
program variables, one per loop head.
"""
from __future__ import annotations

import os
import re
import shlex
import subprocess
import tempfile
from functools import reduce

from ..lang import ast as A
from .chc import ChcScript
from .verdicts import Correct, Incorrect, Unknown, Verdict

SOLVER_ENV = "INSTRUMENTA_SOLVER"


class SolverLaunchError(Exception):
    pass


class SolverOutputParseError(Exception):
    pass


def configured_solver(explicit: str | None = None) -> str | None:
    return explicit or os.environ.get(SOLVER_ENV) or None


# ------------------------------------------------------------ s-expressions

_TOKEN = re.compile(r'\s+|;[^\n]*|\(|\)|\|[^|]*\||"(?:[^"]|"")*"|[^\s()|";]+')


def parse_sexprs(text: str) -> list:
    stack: list[list] = [[]]
    pos = 0
    for m in _TOKEN.finditer(text):
        if m.start() != pos:
            raise SolverOutputParseError(f"unexpected character at {pos}")
        pos = m.end()
        tok = m.group()
        if tok.isspace() or tok.startswith(";"):
            continue
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SolverOutputParseError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok[1:-1] if tok.startswith("|") else tok)
    if pos != len(text):
        raise SolverOutputParseError(f"unexpected character at {pos}")
    if len(stack) != 1:
        raise SolverOutputParseError("unbalanced '('")
    return stack[0]


class _NotExpressible(Exception):
    pass


def _to_expr(t, env: dict):
    """Turn a model term into an expression; ``env`` maps bound symbols."""
    if isinstance(t, str):
        if t in env:
            v = env[t]
            if v is None:
                raise _NotExpressible(t)
            return v
        if t == "true":
            return A.BoolLit(True)
        if t == "false":
            return A.BoolLit(False)
        if re.fullmatch(r"\d+", t):
            return A.IntLit(int(t))
        raise _NotExpressible(t)
    if not t:
        raise _NotExpressible("()")
    head, *args = t
    if head == "let":
        inner = dict(env)
        for name, val in args[0]:
            inner[name] = _to_expr(val, env)
        return _to_expr(args[1], inner)
    xs = [_to_expr(a, env) for a in args]
    match head:
        case "and":
            return A.conj(xs)
        case "or":
            return A.disj(xs)
        case "not":
            return A.Not(xs[0])
        case "=>":
            return A.Or(A.Not(xs[0]), xs[1])
        case "=":
            return A.conj([A.Eq(a, b) for a, b in zip(xs, xs[1:])])
        case "<=":
            return A.Leq(xs[0], xs[1])
        case ">=":
            return A.Leq(xs[1], xs[0])
        case "<":
            return A.lt(xs[0], xs[1])
        case ">":
            return A.lt(xs[1], xs[0])
        case "+":
            return reduce(A.Add, xs)
        case "*":
            return reduce(A.Mul, xs)
        case "-":
            if len(xs) == 1:
                if isinstance(xs[0], A.IntLit):
                    return A.IntLit(-xs[0].value)
                return A.Mul(A.IntLit(-1), xs[0])
            return reduce(A.sub, xs)
        case "div":
            return A.Div(xs[0], xs[1])
        case "select":
            return A.Select(xs[0], xs[1])
        case "store":
            return A.Store(xs[0], xs[1], xs[2])
        case "ite":
            c, a, b = xs
            if _is_formula(a) and _is_formula(b):
                return A.Or(A.And(c, a), A.And(A.Not(c), b))
    raise _NotExpressible(str(head))


def _is_formula(e) -> bool:
    return isinstance(e, (A.BoolLit, A.Eq, A.Leq, A.Not, A.And, A.Or))


_PRED_COMMENT = re.compile(r"^; loop (\d+): (\S+) \(([^)]*)\)$", re.M)


def predicate_layout(chc: str | ChcScript) -> dict[str, tuple[int, list]]:
    """Predicate name -> (loop point, argument names) from the script."""
    text = str(chc)
    return {m.group(2): (int(m.group(1)), m.group(3).split())
            for m in _PRED_COMMENT.finditer(text)}


def parse_model(output: str, layout: dict) -> dict | None:
    """Loop point -> formula, or None when some definition falls outside
    what the language can state."""
    forms = parse_sexprs(output)
    defs = [f for f in forms if isinstance(f, list) and f and f[0] == "define-fun"]
    if not defs and forms and isinstance(forms[0], list):
        defs = [f for f in forms[0] if isinstance(f, list) and f and f[0] == "define-fun"]
    out = {}
    try:
        for _, name, params, _sort, body in (d[:5] for d in defs if len(d) >= 5):
            if name not in layout:
                continue
            point, names = layout[name]
            env = {}
            for (sym, _), var in zip(params, names):
                env[sym] = None if "." in var else A.Var(var)
            out[point] = _to_expr(body, env)
    except (_NotExpressible, ValueError, IndexError):
        return None
    for point, _ in layout.values():
        # a predicate the model leaves out is never reached
        out.setdefault(point, A.BoolLit(False))
    return out


# ---------------------------------------------------------------- running

def solve_external(chc: str | ChcScript, solver_cmd: str | None = None,
                   timeout: float = 60.0) -> Verdict:
    """Run the solver on ``chc``; launch and parse failures become Unknown."""
    cmd = configured_solver(solver_cmd)
    if cmd is None:
        return Unknown(f"no solver configured (set {SOLVER_ENV} or pass --solver-cmd)")
    try:
        return _solve(str(chc), cmd, timeout)
    except SolverLaunchError as ex:
        return Unknown(f"solver launch failed: {ex}")
    except SolverOutputParseError as ex:
        return Unknown(f"unreadable solver output: {ex}")


def _solve(text: str, cmd: str, timeout: float) -> Verdict:
    with tempfile.TemporaryDirectory(prefix="instrumenta-") as tmp:
        path = os.path.join(tmp, "query.smt2")
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        try:
            proc = subprocess.run([*shlex.split(cmd), path], capture_output=True, text=True,
                                  timeout=timeout)
        except subprocess.TimeoutExpired:
            return Unknown("timeout")
        except OSError as ex:
            raise SolverLaunchError(str(ex)) from None
    out = proc.stdout
    m = re.search(r"^\s*(sat|unsat|unknown)\b", out, re.M)
    if m is None:
        raise SolverOutputParseError((out + proc.stderr).strip()[:200] or "empty output")
    answer = m.group(1)
    if answer == "unknown":
        return Unknown("solver answered unknown")
    if answer == "unsat":
        return Incorrect(marker="solver refutation")
    try:
        witness = parse_model(out[m.end():], predicate_layout(text))
    except SolverOutputParseError:
        witness = None
    return Correct(witness)
