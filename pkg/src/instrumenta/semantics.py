"""Concrete interpreter: values, expression evaluation, program runs.

Programs run on a small-step machine with an explicit continuation
stack, so a machine state can be copied cheaply at nondet sites.  The
bounded oracle uses that to enumerate executions without re-running
common prefixes.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable

from . import monoids as M
from .lang import ast as A


# ---------------------------------------------------------------- values

class FunArray:
    """Functional array: a default plus finitely many overrides.

    Canonical form: no override equals the default, so structural and
    extensional equality coincide.
    """
    __slots__ = ("default", "entries", "_hash")

    def __init__(self, default, entries: dict | None = None):
        self.default = default
        if entries:
            entries = {k: v for k, v in entries.items() if v != default}
        self.entries = entries or {}
        self._hash = None

    def get(self, i):
        return self.entries.get(i, self.default)

    def set(self, i, v) -> "FunArray":
        out = FunArray.__new__(FunArray)
        out.default = self.default
        out._hash = None
        entries = dict(self.entries)
        if v == self.default:
            entries.pop(i, None)
        else:
            entries[i] = v
        out.entries = entries
        return out

    def __eq__(self, other):
        return (isinstance(other, FunArray) and self.default == other.default
                and self.entries == other.entries)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.default, frozenset(self.entries.items())))
        return self._hash

    def __repr__(self):
        items = ", ".join(f"{k}: {v!r}" for k, v in sorted(self.entries.items()))
        return f"FunArray({self.default!r}, {{{items}}})"

    @classmethod
    def from_list(cls, values, default=0) -> "FunArray":
        return cls(default, dict(enumerate(values)))


def default_value(t: A.Type):
    if isinstance(t, A.ArrayT):
        return FunArray(default_value(t.elem))
    if t == A.BOOL:
        return False
    if t == A.PAIR:
        return M.Pair(1, 0)
    return 0


class EvalError(Exception):
    """Runtime fault while evaluating; ``kind`` names it."""

    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        super().__init__(f"{kind}: {detail}" if detail else kind)


def _div(a, b):
    if b == 0:
        raise EvalError("DivByZero")
    try:
        q = abs(a) // abs(b)
    except TypeError:
        raise EvalError("InfiniteArithmetic") from None
    return q if (a >= 0) == (b >= 0) else -q


def _index(i):
    # an empty \max or \min can leave a sentinel in an Int variable
    if M.is_inf(i):
        raise EvalError("InfiniteArithmetic")
    return i


# --------------------------------------------------------- compilation

Draw = Callable[[A.Type], Any]


class Compiler:
    """Turns expressions into closures ``f(env) -> value``.

    ``draw`` supplies values for nondet nodes.  Closures are cached per
    node identity, so an AST must outlive its compiler.
    """

    def __init__(self, draw: Draw | None = None):
        self.draw = draw or (lambda t: default_value(t))
        self._cache: dict[int, tuple[Any, Callable]] = {}

    def __call__(self, e) -> Callable[[dict], Any]:
        hit = self._cache.get(id(e))
        if hit is not None and hit[0] is e:
            return hit[1]
        f = self._compile(e)
        self._cache[id(e)] = (e, f)
        return f

    def pred_fn(self, lam: A.Lambda, env: dict):
        body = self(lam.body)
        local = dict(env)
        vv, iv = lam.value_var, lam.index_var

        def p(x, i):
            local[vv] = x
            local[iv] = i
            return body(local)
        return p

    def _compile(self, e):
        c = self
        match e:
            case A.IntLit(v) | A.BoolLit(v):
                return lambda env: v
            case A.Var(n):
                def var(env):
                    try:
                        return env[n]
                    except KeyError:
                        raise EvalError("UnboundVariable", n) from None
                return var
            case A.Eq(l, r):
                fl, fr = c(l), c(r)
                return lambda env: fl(env) == fr(env)
            case A.Leq(l, r):
                fl, fr = c(l), c(r)

                def leq(env):
                    x, y = fl(env), fr(env)
                    if type(x) is not int or type(y) is not int:
                        raise EvalError("InfiniteArithmetic")
                    return x <= y
                return leq
            case A.Not(x):
                fx = c(x)
                return lambda env: not fx(env)
            case A.And(l, r):
                # both sides are evaluated: there is no short-circuiting
                fl, fr = c(l), c(r)
                return lambda env: (fl(env) & fr(env))
            case A.Or(l, r):
                fl, fr = c(l), c(r)
                return lambda env: (fl(env) | fr(env))
            case A.Add(l, r):
                fl, fr = c(l), c(r)

                def add(env):
                    try:
                        return fl(env) + fr(env)
                    except TypeError:
                        raise EvalError("InfiniteArithmetic") from None
                return add
            case A.Mul(l, r):
                fl, fr = c(l), c(r)

                def mul(env):
                    try:
                        return fl(env) * fr(env)
                    except TypeError:
                        raise EvalError("InfiniteArithmetic") from None
                return mul
            case A.Div(l, r):
                fl, fr = c(l), c(r)
                return lambda env: _div(fl(env), fr(env))
            case A.ConstArray(f):
                ff = c(f)
                return lambda env: FunArray(ff(env))
            case A.Select(a, i):
                fa, fi = c(a), c(i)
                return lambda env: fa(env).get(_index(fi(env)))
            case A.Store(a, i, v):
                fa, fi, fv = c(a), c(i), c(v)
                return lambda env: fa(env).set(_index(fi(env)), fv(env))
            case A.Nondet(t):
                return lambda env: c.draw(t)
            case A.Quant(kind, a, l, u, p):
                return self._aggregate(M.registry_lookup(kind), a, l, u, p, True)
            case A.Aggregate(name, a, l, u, p):
                return self._aggregate(M.registry_lookup(name), a, l, u, p, True)
            case A.MonoidOp(op, key, args, p):
                return self._monoid(op, M.registry_lookup(key), args, p)
            case A.ExistsVars(bound, body):
                fb = c(body)
                return lambda env: _eval_exists(bound, body, fb, env, c)
        raise TypeError(f"cannot evaluate {e!r}")

    def _aggregate(self, spec, a, l, u, p, finalized):
        fa, fl, fu = self(a), self(l), self(u)

        def agg(env):
            pf = self.pred_fn(p, env) if isinstance(p, A.Lambda) else None
            v = fold_slice(fa(env), fl(env), fu(env), spec, pf)
            return M.finalize(spec, v) if finalized else v
        return agg

    def _monoid(self, op, spec, args, p):
        m = spec.monoid
        fs = [self(x) for x in args]
        match op:
            case "unit":
                ident = m.identity
                return lambda env: ident
            case "combine":
                f1, f2 = fs
                return lambda env: m.combine(f1(env), f2(env))
            case "uncombine":
                f1, f2 = fs

                def unc(env):
                    try:
                        return M.inverse_combine(m, f1(env), f2(env))
                    except M.PartialityError as ex:
                        raise EvalError("Partiality", str(ex)) from None
                return unc
            case "lift":
                f1, f2 = fs

                def lift(env):
                    pf = self.pred_fn(p, env) if isinstance(p, A.Lambda) else None
                    return spec.singleton(f1(env), f2(env), pf)
                return lift
            case "finalize":
                (f1,) = fs
                return lambda env: M.finalize(spec, f1(env))
            case "fold":
                return self._aggregate(spec, *args, p, False)
        raise TypeError(f"unknown monoid operation {op}")


def fold_slice(a: FunArray, lo: int, hi: int, spec: M.AggregatorSpec, pred_fn=None):
    if M.is_inf(lo) or M.is_inf(hi):
        raise EvalError("InfiniteArithmetic")
    return M.fold(spec, ((a.get(k), k) for k in range(lo, hi)), pred_fn)


def eval_aggregate_brute(a: FunArray, lo: int, hi: int, agg: M.AggregatorSpec,
                         s: dict | None = None):
    """Fold h over a[lo..hi) then finalize; g(e) on an empty range."""
    pf = None
    if agg.predicated:
        if agg.pred is None:
            raise ValueError(f"aggregator {agg.key} needs a predicate")
        pf = Compiler().pred_fn(agg.pred, dict(s or {}))
    return M.finalize(agg, fold_slice(a, lo, hi, agg, pf))


EXISTS_SEARCH_BOUND = 64


def _conjuncts(e):
    if isinstance(e, A.And):
        return _conjuncts(e.l) + _conjuncts(e.r)
    return [e]


def _eval_exists(bound, body, fbody, env, comp: Compiler) -> bool:
    """Decide an existential by propagating forced equalities, then a
    bounded search over whatever is left."""
    names = [n for n, _ in bound]
    local = dict(env)
    for n in names:
        local.pop(n, None)
    solved: set[str] = set()
    progress = True
    while progress:
        progress = False
        for cj in _conjuncts(body):
            if not isinstance(cj, A.Eq):
                continue
            for lhs, rhs in ((cj.l, cj.r), (cj.r, cj.l)):
                if (isinstance(lhs, A.Var) and lhs.name in names and lhs.name not in solved
                        and all(v in local for v in A.free_vars(rhs))):
                    try:
                        local[lhs.name] = comp(rhs)(local)
                    except EvalError:
                        continue
                    solved.add(lhs.name)
                    progress = True
                    break
    rest = [(n, t) for n, t in bound if n not in solved]

    def search(k):
        if k == len(rest):
            try:
                return bool(fbody(local))
            except EvalError:
                return False
        n, t = rest[k]
        vals = (False, True) if t == A.BOOL else range(-EXISTS_SEARCH_BOUND, EXISTS_SEARCH_BOUND + 1)
        for v in vals:
            local[n] = v
            if search(k + 1):
                return True
        return False

    if any(isinstance(t, A.ArrayT) for _, t in rest):
        raise EvalError("Unsupported", "existential over arrays")
    return search(0)


def eval_expr(e, s: dict, nd: "NondetSource | None" = None):
    draw = nd.drawer(None, None) if nd is not None else None
    return Compiler(draw)(e)(s)


# -------------------------------------------------------------- outcomes

@dataclass(frozen=True)
class Step:
    point: int
    vars: dict = field(compare=False)
    draws: tuple = ()


@dataclass
class Terminated:
    final: dict
    trace: list = field(default_factory=list)


@dataclass
class AssertFailed:
    trace: list
    point: int


@dataclass
class Blocked:
    point: int
    trace: list = field(default_factory=list)


@dataclass
class BudgetExceeded:
    trace: list = field(default_factory=list)


@dataclass
class RunError:
    kind: str
    point: int
    trace: list = field(default_factory=list)


RunOutcome = Terminated | AssertFailed | Blocked | BudgetExceeded | RunError


# ------------------------------------------------------- nondet sources

class NondetSource:
    """Supplies values at nondet sites.

    ``drawer(point, target)`` returns the draw function for one
    statement; ``target`` is the assigned variable when the nondet is the
    whole right-hand side.
    """

    def drawer(self, point, target) -> Draw:
        raise NotImplementedError


class Seeded(NondetSource):
    def __init__(self, seed: int = 0, lo: int = -8, hi: int = 8):
        self.seed = seed
        self.rng = random.Random(seed)
        self.lo, self.hi = lo, hi

    def value(self, t: A.Type):
        if t == A.BOOL:
            return self.rng.random() < 0.5
        if isinstance(t, A.ArrayT):
            n = self.rng.randint(0, 6)
            return FunArray(default_value(t.elem), {k: self.value(t.elem) for k in range(n)})
        return self.rng.randint(self.lo, self.hi)

    def drawer(self, point, target):
        return self.value


class Scripted(NondetSource):
    """Values from a list, or per variable from ``by_name``; missing
    values fall back to the type's default."""

    def __init__(self, values=(), by_name: dict | None = None):
        self.values = list(values)
        self.by_name = {k: (list(v) if isinstance(v, (list, tuple)) else [v])
                        for k, v in (by_name or {}).items()}

    @classmethod
    def parse(cls, script: str) -> "Scripted":
        """``"N=3,x=1"`` style; a name may repeat for successive draws."""
        by_name: dict[str, list] = {}
        for part in script.replace(";", ",").split(","):
            part = part.strip()
            if not part:
                continue
            k, _, v = part.partition("=")
            v = v.strip()
            val = {"true": True, "false": False}.get(v)
            by_name.setdefault(k.strip(), []).append(int(v) if val is None else val)
        return cls(by_name=by_name)

    def drawer(self, point, target):
        def draw(t):
            queue = self.by_name.get(target) if target is not None else None
            if queue:
                return queue.pop(0)
            if self.values:
                return self.values.pop(0)
            return default_value(t)
        return draw


class Enumerating(NondetSource):
    """Finite domains per nondet site, keyed by assigned variable name or
    control point id, with a default interval for the rest."""

    def __init__(self, default: tuple[int, int] = (0, 1), per_site: dict | None = None,
                 array_len: int = 0):
        self.default = default
        self.per_site = dict(per_site or {})
        self.array_len = array_len
        for lo, hi in [default, *self.per_site.values()]:
            if lo > hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")

    def domain(self, point, target, t: A.Type) -> list:
        if t == A.BOOL:
            return [False, True]
        lo, hi = self.per_site.get(target, self.per_site.get(point, self.default))
        if isinstance(t, A.ArrayT):
            from itertools import product
            return [FunArray(default_value(t.elem), dict(enumerate(vs)))
                    for n in range(self.array_len + 1)
                    for vs in product(range(lo, hi + 1), repeat=n)]
        return list(range(lo, hi + 1))

    def drawer(self, point, target):
        return lambda t: self.domain(point, target, t)[0]


# ---------------------------------------------------------------- machine

def _nondet_types(s) -> list[A.Type]:
    return [x.type for e in A.stmt_exprs(s) for x in A.subexprs(e) if isinstance(x, A.Nondet)]


def _target(s):
    if isinstance(s, (A.Decl, A.Assign)) and isinstance(s.rhs, A.Nondet):
        return s.name
    return None


class Machine:
    """Small-step executor for one program.

    A machine state is ``(env, stack, steps, trace)``; ``trace`` is a
    cons list ``(prev, Step)`` so that forks share their prefix.
    """

    def __init__(self, prog: A.Program, budget: int = 100_000, record: bool = True):
        self.prog = prog
        self.budget = budget
        self.record = record
        self._queue: list = []
        self.comp = Compiler(self._draw)
        self.nondet_types = {s.pid: _nondet_types(s) for s in A.walk(prog.body)}

    def _draw(self, t):
        return self._queue.pop(0)

    def initial(self):
        return ({}, [self.prog.body], 0, None)

    def run(self, state, supply) -> tuple:
        """Run until a nondet statement, a terminal outcome or the budget.

        ``supply(stmt, types)`` returns the draws for a statement, or
        None to pause; a pause returns ("pause", state, stmt).
        """
        env, stack, steps, trace = state
        comp = self.comp
        record = self.record
        while stack:
            s = stack.pop()
            if isinstance(s, A.Seq):
                stack.extend(reversed(s.stmts))
                continue
            if steps >= self.budget:
                stack.append(s)
                return ("budget", (env, stack, steps, trace))
            draws = ()
            types = self.nondet_types.get(s.pid)
            if types:
                draws = supply(s, types)
                if draws is None:
                    stack.append(s)
                    return ("pause", (env, stack, steps, trace), s)
                self._queue = list(draws)
            steps += 1
            try:
                match s:
                    case A.Decl(n, t, rhs):
                        env[n] = default_value(t) if rhs is None else comp(rhs)(env)
                        ok = True
                    case A.Assign(n, rhs):
                        env[n] = comp(rhs)(env)
                        ok = True
                    case A.Skip():
                        ok = True
                    case A.Assert(c) | A.Assume(c):
                        ok = comp(c)(env)
                    case A.While(c, b):
                        if comp(c)(env):
                            stack.append(s)
                            stack.append(b)
                        ok = True
                    case A.If(c, t, e):
                        stack.append(t if comp(c)(env) else e)
                        ok = True
            except EvalError as ex:
                if record:
                    trace = (trace, Step(s.pid, dict(env), tuple(draws)))
                return ("error", (env, stack, steps, trace), s, ex.kind)
            if record:
                trace = (trace, Step(s.pid, dict(env), tuple(draws)))
            if not ok:
                kind = "assert" if isinstance(s, A.Assert) else "blocked"
                return (kind, (env, stack, steps, trace), s)
        return ("done", (env, stack, steps, trace))

    @staticmethod
    def fork(state):
        env, stack, steps, trace = state
        return (dict(env), list(stack), steps, trace)


def trace_list(cons) -> list[Step]:
    out = []
    while cons is not None:
        cons, step = cons
        out.append(step)
    out.reverse()
    return out


def outcome_of(result) -> RunOutcome:
    tag = result[0]
    env, _, _, cons = result[1]
    tr = trace_list(cons)
    match tag:
        case "done":
            return Terminated(dict(env), tr)
        case "assert":
            return AssertFailed(tr, result[2].pid)
        case "blocked":
            return Blocked(result[2].pid, tr)
        case "budget":
            return BudgetExceeded(tr)
        case "error":
            return RunError(result[3], result[2].pid, tr)
    raise ValueError(tag)


def run(p: A.Program, nd: NondetSource | None = None, budget: int = 100_000,
        record: bool = True) -> RunOutcome:
    """Execute ``p`` on one path; faults are outcomes, never exceptions."""
    nd = nd or Scripted()
    m = Machine(p, budget, record)

    def supply(s, types):
        draw = nd.drawer(s.pid, _target(s))
        return [draw(t) for t in types]

    return outcome_of(m.run(m.initial(), supply))


def replay(p: A.Program, trace: list[Step], budget: int = 100_000) -> RunOutcome:
    """Re-run ``p`` feeding the draws recorded in ``trace``."""
    draws = [d for st in trace for d in st.draws]
    return run(p, Scripted(draws), budget)


# ------------------------------------------------------------ comparison

def _rename_expr(e, ren):
    match e:
        case A.Var(n):
            return A.Var(ren(n))
        case A.ExistsVars(bound, body):
            return A.ExistsVars(tuple((ren(n), t) for n, t in bound), _rename_expr(body, ren))
    out = A.map_children(e, lambda c: _rename_expr(c, ren))
    if isinstance(out, (A.Quant, A.Aggregate, A.MonoidOp)) and isinstance(out.pred, A.Lambda):
        lam = out.pred
        from dataclasses import replace
        out = replace(out, pred=A.Lambda(ren(lam.value_var), ren(lam.index_var),
                                         _rename_expr(lam.body, ren)))
    return out


def rename_stmt(s, ren):
    from dataclasses import replace
    match s:
        case A.Decl(n, t, rhs):
            return replace(s, name=ren(n), rhs=None if rhs is None else _rename_expr(rhs, ren))
        case A.Assign(n, rhs):
            return replace(s, name=ren(n), rhs=_rename_expr(rhs, ren))
        case A.Seq(stmts):
            return replace(s, stmts=tuple(rename_stmt(c, ren) for c in stmts))
        case A.While(c, b):
            return replace(s, cond=_rename_expr(c, ren), body=rename_stmt(b, ren))
        case A.If(c, t, e):
            return replace(s, cond=_rename_expr(c, ren), then=rename_stmt(t, ren),
                           els=rename_stmt(e, ren))
        case A.Assert(c) | A.Assume(c):
            return replace(s, cond=_rename_expr(c, ren))
    return s


def _canonical(p: A.Program, shared: set[str]):
    order: dict[str, str] = {}

    def ren(n):
        if n in shared:
            return n
        if n not in order:
            order[n] = f"#{len(order)}"
        return order[n]

    return rename_stmt(p.body, ren)


def structurally_equivalent(p1: A.Program, p2: A.Program) -> bool:
    """Equal up to a bijective renaming of the names the two programs do
    not share (the instrumentation's fresh variables)."""
    n1, n2 = A.all_names(p1), A.all_names(p2)
    shared = n1 & n2
    return _canonical(p1, shared) == _canonical(p2, shared)


# ---------------------------------------------------------------- export

def value_to_json(v):
    if isinstance(v, FunArray):
        return {"default": value_to_json(v.default),
                "entries": {str(k): value_to_json(x) for k, x in sorted(v.entries.items())}}
    if isinstance(v, M.Pair):
        return {"p": v.p, "c": v.c}
    if M.is_inf(v):
        return repr(v)
    return v


def trace_jsonl(trace: list[Step]) -> str:
    lines = [json.dumps({"step": k, "point": st.point,
                         "vars": {n: value_to_json(x) for n, x in st.vars.items()}})
             for k, st in enumerate(trace)]
    return "\n".join(lines) + ("\n" if lines else "")
