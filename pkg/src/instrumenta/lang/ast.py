"""AST for the core language with arrays, quantifiers and aggregates.

Expressions and statements are frozen dataclasses compared structurally.
Statements carry a control point id (``pid``) that is excluded from
equality, so two programs that differ only in numbering compare equal.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator


# ---------------------------------------------------------------- types

@dataclass(frozen=True)
class Prim:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ArrayT:
    elem: "Type"

    def __str__(self) -> str:
        return f"Array {self.elem}"


Type = Prim | ArrayT

INT = Prim("Int")
BOOL = Prim("Bool")
# carriers of monoids that have no program-level counterpart
NEG_INF_INT = Prim("ExtIntNegInf")
POS_INF_INT = Prim("ExtIntPosInf")
PAIR = Prim("PairIntNat")

PRIM_TYPES = {t.name: t for t in (INT, BOOL, NEG_INF_INT, POS_INF_INT, PAIR)}


def is_intlike(t: Type) -> bool:
    return t in (INT, NEG_INF_INT, POS_INF_INT)


# ---------------------------------------------------------- expressions

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Eq:
    l: "Expr"
    r: "Expr"


@dataclass(frozen=True)
class Leq:
    l: "Expr"
    r: "Expr"


@dataclass(frozen=True)
class Not:
    e: "Expr"


@dataclass(frozen=True)
class And:
    l: "Expr"
    r: "Expr"


@dataclass(frozen=True)
class Or:
    l: "Expr"
    r: "Expr"


@dataclass(frozen=True)
class Add:
    l: "Expr"
    r: "Expr"


@dataclass(frozen=True)
class Mul:
    l: "Expr"
    r: "Expr"


@dataclass(frozen=True)
class Div:
    l: "Expr"
    r: "Expr"


@dataclass(frozen=True)
class ConstArray:
    fill: "Expr"


@dataclass(frozen=True)
class Select:
    array: "Expr"
    index: "Expr"


@dataclass(frozen=True)
class Store:
    array: "Expr"
    index: "Expr"
    value: "Expr"


@dataclass(frozen=True)
class Nondet:
    type: Type


@dataclass(frozen=True)
class Lambda:
    """Predicate binding the element value and its index, in that order."""
    value_var: str
    index_var: str
    body: "Expr"


@dataclass(frozen=True)
class Quant:
    kind: str  # "forall" | "exists"
    array: "Expr"
    lo: "Expr"
    hi: "Expr"
    pred: "Lambda | PredRef"


@dataclass(frozen=True)
class Aggregate:
    name: str  # sum, max, min, product, numof
    array: "Expr"
    lo: "Expr"
    hi: "Expr"
    pred: "Lambda | PredRef | None" = None


@dataclass(frozen=True)
class MonoidOp:
    """Ghost-level monoid operation on an aggregator's carrier.

    op is one of unit, combine, uncombine, lift, finalize, fold.
    """
    op: str
    agg: str
    args: tuple["Expr", ...] = ()
    pred: "Lambda | PredRef | None" = None


@dataclass(frozen=True)
class ExistsVars:
    """Existential binder over scalar variables, used in witnesses."""
    bound: tuple[tuple[str, Type], ...]
    body: "Expr"


# placeholders that only occur in operator patterns and templates

@dataclass(frozen=True)
class Meta:
    name: str


@dataclass(frozen=True)
class PredRef:
    """The operator's predicate used in lambda position."""


@dataclass(frozen=True)
class PredApp:
    """The operator's predicate applied to (value, index)."""
    value: "Expr"
    index: "Expr"


Expr = (IntLit | BoolLit | Var | Eq | Leq | Not | And | Or | Add | Mul | Div
        | ConstArray | Select | Store | Nondet | Quant | Aggregate | MonoidOp
        | ExistsVars | Meta | PredApp)

AGGREGATE_NAMES = ("sum", "max", "min", "product", "numof")
QUANT_NAMES = ("forall", "exists")


def children(e) -> tuple:
    """Direct subexpressions (lambda bodies are not descended into)."""
    match e:
        case Eq(l, r) | Leq(l, r) | And(l, r) | Or(l, r) | Add(l, r) | Mul(l, r) | Div(l, r):
            return (l, r)
        case Not(x) | ConstArray(x):
            return (x,)
        case Select(a, i):
            return (a, i)
        case Store(a, i, v):
            return (a, i, v)
        case Quant(_, a, l, u, _) | Aggregate(_, a, l, u, _):
            return (a, l, u)
        case MonoidOp(_, _, args, _):
            return args
        case PredApp(v, i):
            return (v, i)
        case ExistsVars(_, body):
            return (body,)
    return ()


def map_children(e, f):
    """Rebuild ``e`` with ``f`` applied to each direct subexpression."""
    match e:
        case Eq(l, r) | Leq(l, r) | And(l, r) | Or(l, r) | Add(l, r) | Mul(l, r) | Div(l, r):
            return type(e)(f(l), f(r))
        case Not(x):
            return Not(f(x))
        case ConstArray(x):
            return ConstArray(f(x))
        case Select(a, i):
            return Select(f(a), f(i))
        case Store(a, i, v):
            return Store(f(a), f(i), f(v))
        case Quant(k, a, l, u, p):
            return Quant(k, f(a), f(l), f(u), p)
        case Aggregate(n, a, l, u, p):
            return Aggregate(n, f(a), f(l), f(u), p)
        case MonoidOp(op, agg, args, p):
            return MonoidOp(op, agg, tuple(f(x) for x in args), p)
        case PredApp(v, i):
            return PredApp(f(v), f(i))
        case ExistsVars(b, body):
            return ExistsVars(b, f(body))
    return e


def lambdas_of(e) -> tuple:
    if isinstance(e, (Quant, Aggregate, MonoidOp)) and isinstance(e.pred, Lambda):
        return (e.pred,)
    return ()


def subexprs(e) -> Iterator:
    """Pre-order walk over ``e`` including lambda bodies."""
    yield e
    for lam in lambdas_of(e):
        yield from subexprs(lam.body)
    for c in children(e):
        yield from subexprs(c)


def free_vars(e) -> set[str]:
    match e:
        case Var(n):
            return {n}
        case ExistsVars(bound, body):
            return free_vars(body) - {n for n, _ in bound}
    out: set[str] = set()
    for lam in lambdas_of(e):
        out |= free_vars(lam.body) - {lam.value_var, lam.index_var}
    for c in children(e):
        out |= free_vars(c)
    return out


def substitute(e, mapping: dict):
    """Capture-naive simultaneous substitution of variables by expressions.

    Inside a lambda the bound names shadow the mapping.
    """
    if not mapping:
        return e
    match e:
        case Var(n):
            return mapping.get(n, e)
        case ExistsVars(bound, body):
            inner = {k: v for k, v in mapping.items() if k not in {n for n, _ in bound}}
            return ExistsVars(bound, substitute(body, inner))
    out = map_children(e, lambda c: substitute(c, mapping))
    if isinstance(out, (Quant, Aggregate, MonoidOp)) and isinstance(out.pred, Lambda):
        lam = out.pred
        inner = {k: v for k, v in mapping.items() if k not in (lam.value_var, lam.index_var)}
        out = replace(out, pred=Lambda(lam.value_var, lam.index_var, substitute(lam.body, inner)))
    return out


def apply_pred(lam: Lambda, value, index):
    return substitute(lam.body, {lam.value_var: value, lam.index_var: index})


def alpha_equal(p: Lambda, q: Lambda) -> bool:
    """Lambdas equal up to consistent renaming of their bound variables."""
    fresh_v, fresh_i = Var("\x00v"), Var("\x00i")
    return apply_pred(p, fresh_v, fresh_i) == apply_pred(q, fresh_v, fresh_i)


def conj(parts):
    parts = list(parts)
    if not parts:
        return BoolLit(True)
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(parts):
    parts = list(parts)
    if not parts:
        return BoolLit(False)
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def sub(a, b):
    """``a - b`` in the desugared form the parser produces."""
    return Add(a, Mul(IntLit(-1), b))


def lt(a, b):
    return Not(Leq(b, a))


# ----------------------------------------------------------- statements

@dataclass(frozen=True)
class Skip:
    pid: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Decl:
    name: str
    type: Type
    rhs: Expr | None = None
    pid: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Assign:
    name: str
    rhs: Expr
    pid: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Seq:
    stmts: tuple["Stmt", ...]
    pid: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Stmt"
    pid: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    els: "Stmt"
    pid: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Assert:
    cond: Expr
    pid: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Assume:
    cond: Expr
    pid: int = field(default=-1, compare=False)


Stmt = Skip | Decl | Assign | Seq | While | If | Assert | Assume
ATOMIC = (Skip, Decl, Assign, Assert, Assume)


def seq(*stmts) -> Stmt:
    """Flattening sequence constructor; a single statement is returned as is."""
    flat: list = []
    for s in stmts:
        if s is None:
            continue
        if isinstance(s, Seq):
            flat.extend(s.stmts)
        else:
            flat.append(s)
    if not flat:
        return Skip()
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def stmt_children(s) -> tuple:
    match s:
        case Seq(stmts):
            return stmts
        case While(_, body):
            return (body,)
        case If(_, t, e):
            return (t, e)
    return ()


def walk(s) -> Iterator:
    """Pre-order walk over statements."""
    yield s
    for c in stmt_children(s):
        yield from walk(c)


def stmt_exprs(s) -> tuple:
    match s:
        case Decl(_, _, rhs):
            return () if rhs is None else (rhs,)
        case Assign(_, rhs):
            return (rhs,)
        case While(c, _) | If(c, _, _) | Assert(c) | Assume(c):
            return (c,)
    return ()


def number(s, start: int = 0) -> Stmt:
    """Assign dense pre-order control point ids starting at ``start``."""
    counter = [start]

    def go(t):
        pid = counter[0]
        counter[0] += 1
        match t:
            case Seq(stmts):
                return Seq(tuple(go(c) for c in stmts), pid=pid)
            case While(c, body):
                return While(c, go(body), pid=pid)
            case If(c, th, el):
                th2 = go(th)
                return If(c, th2, go(el), pid=pid)
        return replace(t, pid=pid)

    return go(s)


@dataclass(frozen=True)
class Program:
    vocab: dict = field(compare=False, hash=False)
    body: Stmt

    def points(self) -> dict[int, Stmt]:
        return {s.pid: s for s in walk(self.body)}

    def declared(self) -> dict[str, Type]:
        return dict(self.vocab)


def declarations(s) -> dict[str, Type]:
    out: dict[str, Type] = {}
    for t in walk(s):
        if isinstance(t, Decl):
            out.setdefault(t.name, t.type)
    return out


def make_program(body: Stmt) -> Program:
    body = number(body)
    return Program(declarations(body), body)


def all_names(p: Program) -> set[str]:
    names = set(p.vocab)
    for s in walk(p.body):
        for e in stmt_exprs(s):
            for x in subexprs(e):
                if isinstance(x, Var):
                    names.add(x.name)
                elif isinstance(x, (Quant, Aggregate, MonoidOp)) and isinstance(x.pred, Lambda):
                    names |= {x.pred.value_var, x.pred.index_var}
        if isinstance(s, (Decl, Assign)):
            names.add(s.name)
    return names


class FreshNamer:
    """Produces ``base$k`` names with a monotone counter, skipping taken ones."""

    def __init__(self, taken=()):
        self.taken = set(taken)
        self.counter = 0
        for n in self.taken:
            head, _, k = n.rpartition("$")
            if head and k.isdigit():
                self.counter = max(self.counter, int(k))

    def __call__(self, base: str) -> str:
        base = base.split("$")[0]
        while True:
            self.counter += 1
            name = f"{base}${self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name
