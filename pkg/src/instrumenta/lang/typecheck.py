"""Type checking and elaboration of nondet types."""
from __future__ import annotations

from dataclasses import dataclass, replace

from . import ast as A


@dataclass(frozen=True)
class TypeCheckError:
    node: object
    expected: str
    found: str

    def __str__(self) -> str:
        return f"type error in {self.node}: expected {self.expected}, found {self.found}"


class IllTyped(Exception):
    def __init__(self, errors: list[TypeCheckError]):
        self.errors = errors
        super().__init__("; ".join(str(e) for e in errors[:5]))


@dataclass(frozen=True)
class TypedProgram:
    program: A.Program

    def type_of(self, e, extra: dict | None = None) -> A.Type:
        env = dict(self.program.vocab)
        env.update(extra or {})
        return infer(e, env)


def _carrier(key: str) -> A.Type:
    from ..monoids import registry_lookup
    return registry_lookup(key).monoid.carrier


def _spec(key: str):
    from ..monoids import registry_lookup
    return registry_lookup(key)


class _Checker:
    def __init__(self, env: dict):
        self.env = env
        self.errors: list[TypeCheckError] = []

    def err(self, node, expected, found):
        self.errors.append(TypeCheckError(node, str(expected), str(found)))

    def want(self, e, expected: A.Type):
        """Check ``e`` against ``expected``; returns the elaborated expr."""
        if isinstance(e, A.Nondet):
            return A.Nondet(expected)
        e2, t = self.expr(e)
        if t is not None and not _compatible(t, expected):
            self.err(e, expected, t)
        return e2

    def want_array(self, e):
        e2, t = self.expr(e)
        if t is not None and not isinstance(t, A.ArrayT):
            self.err(e, "Array", t)
            return e2, None
        return e2, (t.elem if t is not None else None)

    def lam(self, lam, elem):
        if not isinstance(lam, A.Lambda):
            self.err(lam, "lambda", type(lam).__name__)
            return lam
        saved = self.env
        self.env = dict(saved)
        self.env[lam.value_var] = elem if elem is not None else A.INT
        self.env[lam.index_var] = A.INT
        body = self.want(lam.body, A.BOOL)
        self.env = saved
        return A.Lambda(lam.value_var, lam.index_var, body)

    def expr(self, e) -> tuple[object, A.Type | None]:
        match e:
            case A.IntLit():
                return e, A.INT
            case A.BoolLit():
                return e, A.BOOL
            case A.Var(n):
                if n not in self.env:
                    self.err(e, "declared variable", f"undeclared {n}")
                    return e, None
                return e, self.env[n]
            case A.Nondet(t):
                return e, t
            case A.Eq(l, r):
                l2, tl = self.expr(l)
                if isinstance(r, A.Nondet) and tl is not None:
                    return A.Eq(l2, A.Nondet(tl)), A.BOOL
                r2, tr = self.expr(r)
                if tl is not None and tr is not None and not _compatible(tl, tr) and not _compatible(tr, tl):
                    self.err(e, tl, tr)
                return A.Eq(l2, r2), A.BOOL
            case A.Leq(l, r):
                return A.Leq(self.want(l, A.INT), self.want(r, A.INT)), A.BOOL
            case A.Add(l, r) | A.Mul(l, r) | A.Div(l, r):
                return type(e)(self.want(l, A.INT), self.want(r, A.INT)), A.INT
            case A.Not(x):
                return A.Not(self.want(x, A.BOOL)), A.BOOL
            case A.And(l, r) | A.Or(l, r):
                return type(e)(self.want(l, A.BOOL), self.want(r, A.BOOL)), A.BOOL
            case A.ConstArray(f):
                f2, t = self.expr(f)
                return A.ConstArray(f2), (A.ArrayT(t) if t is not None else None)
            case A.Select(a, i):
                a2, elem = self.want_array(a)
                return A.Select(a2, self.want(i, A.INT)), elem
            case A.Store(a, i, v):
                a2, elem = self.want_array(a)
                v2 = self.want(v, elem) if elem is not None else self.expr(v)[0]
                return A.Store(a2, self.want(i, A.INT), v2), (A.ArrayT(elem) if elem else None)
            case A.Quant(k, a, l, u, p):
                a2, elem = self.want_array(a)
                return A.Quant(k, a2, self.want(l, A.INT), self.want(u, A.INT), self.lam(p, elem)), A.BOOL
            case A.Aggregate(name, a, l, u, p):
                if name not in A.AGGREGATE_NAMES:
                    self.err(e, "aggregate name", name)
                    return e, None
                spec = _spec(name)
                a2, elem = self.want_array(a)
                if spec.elem_type is not None and elem is not None and elem != spec.elem_type:
                    self.err(a, A.ArrayT(spec.elem_type), A.ArrayT(elem))
                if spec.predicated:
                    p = self.lam(p, elem)
                elif p is not None:
                    self.err(e, "no predicate", "lambda")
                return A.Aggregate(name, a2, self.want(l, A.INT), self.want(u, A.INT), p), spec.result_type
            case A.MonoidOp(op, key, args, p):
                return self.monoid_op(e, op, key, args, p)
            case A.ExistsVars(bound, body):
                saved = self.env
                self.env = dict(saved)
                self.env.update(dict(bound))
                body2 = self.want(body, A.BOOL)
                self.env = saved
                return A.ExistsVars(bound, body2), A.BOOL
        self.err(e, "program expression", type(e).__name__)
        return e, None

    def monoid_op(self, e, op, key, args, p):
        try:
            spec = _spec(key)
        except KeyError:
            self.err(e, "registered aggregator", key)
            return e, None
        c = spec.monoid.carrier
        elem = spec.elem_type
        if spec.predicated and op in ("lift", "fold"):
            if op == "fold":
                a2, elem = self.want_array(args[0])
                p = self.lam(p, elem)
                rest = (a2, self.want(args[1], A.INT), self.want(args[2], A.INT))
                return A.MonoidOp(op, key, rest, p), c
            x2, elem = self.expr(args[0])
            p = self.lam(p, elem)
            return A.MonoidOp(op, key, (x2, self.want(args[1], A.INT)), p), c
        match op:
            case "unit":
                return e, c
            case "combine" | "uncombine":
                return A.MonoidOp(op, key, tuple(self.want(x, c) for x in args), p), c
            case "lift":
                x2 = self.want(args[0], elem) if elem is not None else self.expr(args[0])[0]
                return A.MonoidOp(op, key, (x2, self.want(args[1], A.INT)), p), c
            case "finalize":
                return A.MonoidOp(op, key, (self.want(args[0], c),), p), spec.result_type
            case "fold":
                a2, el = self.want_array(args[0])
                if elem is not None and el is not None and el != elem:
                    self.err(args[0], A.ArrayT(elem), A.ArrayT(el))
                return A.MonoidOp(op, key, (a2, self.want(args[1], A.INT), self.want(args[2], A.INT)), p), c
        self.err(e, "monoid operation", op)
        return e, None

    def stmt(self, s, declared: set):
        match s:
            case A.Skip():
                return s
            case A.Decl(n, ty, rhs):
                if n in declared:
                    self.err(s, "fresh declaration", f"redeclared {n}")
                declared.add(n)
                if rhs is None:
                    return s
                return replace(s, rhs=self.want(rhs, ty))
            case A.Assign(n, rhs):
                if n not in self.env:
                    self.err(s, "declared variable", f"undeclared {n}")
                    return s
                return replace(s, rhs=self.want(rhs, self.env[n]))
            case A.Seq(stmts):
                return replace(s, stmts=tuple(self.stmt(c, declared) for c in stmts))
            case A.While(c, b):
                return replace(s, cond=self.want(c, A.BOOL), body=self.stmt(b, declared))
            case A.If(c, t, el):
                c2 = self.want(c, A.BOOL)
                return replace(s, cond=c2, then=self.stmt(t, declared), els=self.stmt(el, declared))
            case A.Assert(c) | A.Assume(c):
                return replace(s, cond=self.want(c, A.BOOL))
        self.err(s, "statement", type(s).__name__)
        return s


def _compatible(found: A.Type, expected: A.Type) -> bool:
    if found == expected:
        return True
    # finalized max/min values live in Int; carriers widen Int
    return A.is_intlike(found) and A.is_intlike(expected)


def typecheck(p: A.Program) -> TypedProgram | list[TypeCheckError]:
    ch = _Checker(dict(p.vocab))
    body = ch.stmt(p.body, set())
    if ch.errors:
        return ch.errors
    return TypedProgram(A.Program(dict(p.vocab), body))


def check(p: A.Program) -> A.Program:
    """Type check and return the elaborated program, raising on errors."""
    res = typecheck(p)
    if isinstance(res, list):
        raise IllTyped(res)
    return res.program


def infer(e, env: dict) -> A.Type:
    ch = _Checker(dict(env))
    _, t = ch.expr(e)
    if ch.errors:
        raise IllTyped(ch.errors)
    return t


def check_expr(e, env: dict, expected: A.Type = A.BOOL):
    ch = _Checker(dict(env))
    e2 = ch.want(e, expected)
    if ch.errors:
        raise IllTyped(ch.errors)
    return e2
