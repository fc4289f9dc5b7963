"""SMT-LIB Horn clause export.

One predicate per loop head, over every declared variable.  Each
loop-free stretch of code between loop heads (or between the entry and
a loop head, or a loop head and the exit) becomes one clause; the two
arms of a conditional are merged with ``ite`` so the clause count grows
with the number of loops and assertions rather than with the number of
paths.  Assertions give clauses with head ``false``.

Ghost carriers that are not plain SMT sorts are spread over several
symbols: an extended integer ``v`` becomes ``v.inf`` (Bool) and
``v.val`` (Int); a product pair becomes ``v.p`` and ``v.c``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple

from .. import monoids as M
from ..lang import ast as A
from ..lang.typecheck import infer


class UnsupportedNode(Exception):
    """The program contains something the encoding has no term for."""


class Ext(NamedTuple):
    inf: str
    val: str


class PairTerm(NamedTuple):
    p: str
    c: str


# SMT-LIB words a program variable must not print as
_RESERVED = {"and", "or", "not", "ite", "select", "store", "div", "mod", "true", "false",
             "let", "forall", "exists", "assert", "Int", "Bool", "Array", "as", "const",
             "abs", "distinct", "xor", "par", "_"}
_SIMPLE = re.compile(r"^[A-Za-z_][A-Za-z0-9_$.!]*$")


def symbol(name: str) -> str:
    if name in _RESERVED or not _SIMPLE.match(name):
        return "|" + name.replace("|", "") + "|"
    return name


def sort_of(t: A.Type) -> list[str]:
    """SMT sorts of the symbols a value of type ``t`` is spread over."""
    if t == A.INT:
        return ["Int"]
    if t == A.BOOL:
        return ["Bool"]
    if t in (A.NEG_INF_INT, A.POS_INF_INT):
        return ["Bool", "Int"]
    if t == A.PAIR:
        return ["Int", "Int"]
    if isinstance(t, A.ArrayT):
        (inner,) = _scalar_sort(t.elem)
        return [f"(Array Int {inner})"]
    raise UnsupportedNode(f"type {t}")


def _scalar_sort(t):
    s = sort_of(t)
    if len(s) != 1:
        raise UnsupportedNode(f"arrays of {t}")
    return s


def _components(name: str, t: A.Type) -> list[str]:
    if t in (A.NEG_INF_INT, A.POS_INF_INT):
        return [f"{name}.inf", f"{name}.val"]
    if t == A.PAIR:
        return [f"{name}.p", f"{name}.c"]
    return [name]


def _pack(t: A.Type, syms: list[str]):
    if t in (A.NEG_INF_INT, A.POS_INF_INT):
        return Ext(*syms)
    if t == A.PAIR:
        return PairTerm(*syms)
    return syms[0]


def _int(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


def _and(parts) -> str:
    parts = [p for p in parts if p != "true"]
    if not parts:
        return "true"
    if "false" in parts:
        return "false"
    return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"


def _or(parts) -> str:
    parts = list(parts)
    if "true" in parts:
        return "true"
    parts = [p for p in parts if p != "false"]
    if not parts:
        return "false"
    return parts[0] if len(parts) == 1 else f"(or {' '.join(parts)})"


def _not(t: str) -> str:
    if t.startswith("(not ") and _balanced(t[5:-1]):
        return t[5:-1]
    return {"true": "false", "false": "true"}.get(t, f"(not {t})")


def _balanced(t: str) -> bool:
    depth = 0
    for ch in t:
        depth += {"(": 1, ")": -1}.get(ch, 0)
        if depth < 0:
            return False
    return depth == 0


def _ite(c: str, a: str, b: str) -> str:
    if a == b:
        return a
    return {"true": a, "false": b}.get(c, f"(ite {c} {a} {b})")


def _ite_value(c, a, b):
    if isinstance(a, tuple):
        return type(a)(*(_ite(c, x, y) for x, y in zip(a, b)))
    return _ite(c, a, b)


def _eq(a, b) -> str:
    if isinstance(a, Ext):
        return _and([f"(= {a.inf} {b.inf})", f"(or {a.inf} (= {a.val} {b.val}))"])
    if isinstance(a, PairTerm):
        return _and([f"(= {a.p} {b.p})", f"(= {a.c} {b.c})"])
    return f"(= {a} {b})"


def _leq(a, b) -> str:
    if isinstance(a, Ext) or isinstance(b, Ext):
        raise UnsupportedNode("ordering on extended integers")
    return f"(<= {a} {b})"


@dataclass
class _State:
    origin: str  # atom the clause body starts from
    pc: list
    env: dict


@dataclass
class Predicate:
    name: str
    point: int
    args: list  # (symbol, sort, variable, component or None)


@dataclass
class ChcScript:
    text: str
    predicates: dict = field(default_factory=dict)
    clauses: int = 0

    def __str__(self):
        return self.text


class _Encoder:
    def __init__(self, p: A.Program):
        self.p = p
        self.vocab = dict(sorted(p.vocab.items()))
        self.args: list = []
        for n, t in self.vocab.items():
            syms = _components(n, t)
            sorts = sort_of(t)
            comps = [None] if len(syms) == 1 else [s.rsplit(".", 1)[1] for s in syms]
            for s, srt, comp in zip(syms, sorts, comps):
                self.args.append((symbol(s), srt, n, comp))
        self.base = {n: _pack(t, [symbol(s) for s in _components(n, t)]) for n, t in self.vocab.items()}
        self.preds: dict[int, Predicate] = {}
        self.clauses: list[str] = []
        self.fresh_decls: dict[str, str] = {}
        self.counter = 0

    # -- symbols

    def fresh(self, t: A.Type, hint: str = "nd"):
        syms = []
        for srt in sort_of(t):
            self.counter += 1
            s = f"{hint}!{self.counter}"
            self.fresh_decls[s] = srt
            syms.append(s)
        return _pack(t, syms)

    def atom(self, pred: Predicate, env) -> str:
        vals = []
        for n in self.vocab:
            v = env[n]
            vals.extend(v if isinstance(v, tuple) else [v])
        return f"({pred.name} {' '.join(vals)})" if vals else pred.name

    def emit(self, body: list, head: str):
        words = set(re.findall(r"[^\s()]+", " ".join([*body, head])))
        used = {s: srt for s, srt in self.fresh_decls.items() if s in words}
        binders = [f"({a} {srt})" for a, srt, _, _ in self.args] + [f"({s} {srt})" for s, srt in used.items()]
        clause = f"(=> {_and(body)} {head})"
        if binders:
            clause = f"(forall ({' '.join(binders)})\n    {clause})"
        self.clauses.append(f"(assert {clause})")

    # -- expressions

    def tr(self, e, st: _State):
        match e:
            case A.IntLit(v):
                return _int(v)
            case A.BoolLit(v):
                return "true" if v else "false"
            case A.Var(n):
                try:
                    return st.env[n]
                except KeyError:
                    raise UnsupportedNode(f"undeclared variable {n}") from None
            case A.Eq(l, r):
                return _eq(self.tr(l, st), self.tr(r, st))
            case A.Leq(l, r):
                return _leq(self.tr(l, st), self.tr(r, st))
            case A.Not(x):
                return _not(self.tr(x, st))
            case A.And(l, r):
                return _and([self.tr(l, st), self.tr(r, st)])
            case A.Or(l, r):
                return _or([self.tr(l, st), self.tr(r, st)])
            case A.Add(l, r):
                return f"(+ {self._int_term(l, st)} {self._int_term(r, st)})"
            case A.Mul(l, r):
                return f"(* {self._int_term(l, st)} {self._int_term(r, st)})"
            case A.Div(l, r):
                a, b = self._int_term(l, st), self._int_term(r, st)
                if re.fullmatch(r"[1-9]\d*", b):
                    # q = a / b rounded toward zero, as linear bounds on q
                    q = self.fresh(A.INT, "q")
                    rem = f"(- {a} (* {b} {q}))"
                    st.pc.append(f"(ite (>= {a} 0) (and (<= 0 {rem}) (< {rem} {b})) "
                                 f"(and (< (- {b}) {rem}) (<= {rem} 0)))")
                    return q
                self.emit([st.origin, *st.pc, f"(= {b} 0)"], "false")
                return _trunc_div(a, b)
            case A.ConstArray(f):
                (elem,) = _scalar_sort(infer(f, self.vocab))
                return f"((as const (Array Int {elem})) {self.tr(f, st)})"
            case A.Select(a, i):
                return f"(select {self.tr(a, st)} {self.tr(i, st)})"
            case A.Store(a, i, v):
                return f"(store {self.tr(a, st)} {self.tr(i, st)} {self.tr(v, st)})"
            case A.Nondet(t):
                return self.fresh(t)
            case A.MonoidOp(op, key, args, pred):
                return self._monoid(op, M.registry_lookup(key), args, pred, st)
            case A.Quant() | A.Aggregate():
                raise UnsupportedNode(f"{type(e).__name__} remains; instrument the program first")
        raise UnsupportedNode(type(e).__name__)

    def _int_term(self, e, st):
        v = self.tr(e, st)
        if isinstance(v, tuple):
            raise UnsupportedNode("arithmetic on a monoid carrier")
        return v

    def _pred(self, lam, x, i, st):
        if not isinstance(lam, A.Lambda):
            raise UnsupportedNode("unresolved predicate")
        env = dict(st.env)
        env[lam.value_var] = x
        env[lam.index_var] = i
        return self.tr(lam.body, _State(st.origin, st.pc, env))

    def _monoid(self, op, spec: M.AggregatorSpec, args, pred, st):
        m = spec.monoid
        vals = [self.tr(a, st) for a in args] if op != "fold" else []
        match op:
            case "unit":
                return _unit(m)
            case "combine":
                return _combine(m, *vals)
            case "uncombine":
                a, b = vals
                if m is M.SUM:
                    return f"(- {a} {b})"
                if m is M.PROD_PAIR:
                    return PairTerm(f"(div {a.p} {b.p})", f"(- {a.c} {b.c})")
                raise UnsupportedNode(f"uncombine on {m.name}")
            case "lift":
                x, i = vals
                single = spec.singleton
                if single is M._ident:
                    return Ext("false", x) if m in (M.MAX, M.MIN) else x
                if single is M._count:
                    return _ite(self._pred(pred, x, i, st), "1", "0")
                if single is M._holds:
                    return self._pred(pred, x, i, st)
                if single is M._prod_single:
                    nz = f"(not (= {x} 0))"
                    return PairTerm(_ite(nz, x, "1"), _ite(nz, "0", "1"))
                raise UnsupportedNode(f"lift for {spec.key}")
            case "finalize":
                (v,) = vals
                if isinstance(v, Ext):
                    # an infinite result has no Int value: leave it open
                    return _ite(v.inf, self.fresh(A.INT, "inf"), v.val)
                if spec.finalizer is None:
                    return v
                if spec.key == "exists-cancellative":
                    return f"(> {v} 0)"
                if spec.key == "product-cancellative":
                    return _ite(f"(= {v.c} 0)", v.p, "0")
                raise UnsupportedNode(f"finalize for {spec.key}")
        raise UnsupportedNode(f"monoid operation {op}")

    # -- statements

    def exec(self, s, states: list) -> list:
        if not states:
            return states
        match s:
            case A.Seq(stmts):
                for c in stmts:
                    states = self.exec(c, states)
                return states
            case A.Skip():
                return states
            case A.Decl(n, t, rhs):
                return [self._assign(st, n, rhs, t) for st in states]
            case A.Assign(n, rhs):
                return [self._assign(st, n, rhs, self.vocab[n]) for st in states]
            case A.Assert(c):
                out = []
                for st in states:
                    st = _State(st.origin, list(st.pc), st.env)
                    cond = self.tr(c, st)
                    self.emit([st.origin, *st.pc, _not(cond)], "false")
                    # later clauses do not repeat the asserted condition;
                    # Spacer tends to diverge when they do
                    out.append(st)
                return out
            case A.Assume(c):
                out = []
                for st in states:
                    st = _State(st.origin, list(st.pc), st.env)
                    st.pc.append(self.tr(c, st))
                    out.append(st)
                return out
            case A.If(c, t, e):
                out = []
                for st in states:
                    st = _State(st.origin, list(st.pc), st.env)
                    cond = self.tr(c, st)
                    out += self.exec(t, [_State(st.origin, st.pc + [cond], dict(st.env))])
                    out += self.exec(e, [_State(st.origin, st.pc + [_not(cond)], dict(st.env))])
                return self._merge(out)
            case A.While(c, b):
                pred = self._loop_pred(s)
                for st in states:
                    self.emit([st.origin, *st.pc], self.atom(pred, st.env))
                head = self.atom(pred, self.base)
                start = _State(head, [], dict(self.base))
                cond = self.tr(c, start)
                for st in self.exec(b, [_State(head, start.pc + [cond], dict(self.base))]):
                    self.emit([st.origin, *st.pc], self.atom(pred, st.env))
                return [_State(head, start.pc + [_not(cond)], dict(self.base))]
        raise UnsupportedNode(type(s).__name__)

    def _assign(self, st, n, rhs, t):
        st = _State(st.origin, list(st.pc), st.env)
        env = dict(st.env)
        if rhs is None:
            env[n] = _default(t)
        else:
            env[n] = self.tr(rhs, st)
        return _State(st.origin, st.pc, env)

    def _merge(self, states):
        by_origin: dict[str, list] = {}
        for st in states:
            by_origin.setdefault(st.origin, []).append(st)
        out = []
        for origin, group in by_origin.items():
            acc = group[0]
            for nxt in group[1:]:
                c1, c2 = _and(acc.pc), _and(nxt.pc)
                env = {}
                for n in self.vocab:
                    a, b = acc.env[n], nxt.env[n]
                    env[n] = a if a == b else _ite_value(c1, a, b)
                acc = _State(origin, [_or([c1, c2])], env)
            out.append(acc)
        return out

    def _loop_pred(self, w) -> Predicate:
        if w.pid not in self.preds:
            self.preds[w.pid] = Predicate(f"inv_{w.pid}", w.pid, self.args)
        return self.preds[w.pid]

    def run(self) -> ChcScript:
        entry = _State("true", [], dict(self.base))
        self.exec(self.p.body, [entry])
        lines = ["(set-logic HORN)"]
        for pred in self.preds.values():
            names = " ".join(f"{v}{'.' + c if c else ''}" for _, _, v, c in pred.args)
            lines.append(f"; loop {pred.point}: {pred.name} ({names})")
        for pred in self.preds.values():
            sorts = " ".join(srt for _, srt, _, _ in pred.args)
            lines.append(f"(declare-fun {pred.name} ({sorts}) Bool)")
        lines += self.clauses
        lines += ["(check-sat)", "(get-model)", ""]
        return ChcScript("\n".join(lines), dict(self.preds), len(self.clauses))


def _default(t: A.Type):
    if t == A.BOOL:
        return "false"
    if isinstance(t, A.ArrayT):
        return f"((as const {sort_of(t)[0]}) {'false' if t.elem == A.BOOL else '0'})"
    if t in (A.NEG_INF_INT, A.POS_INF_INT):
        return Ext("false", "0")
    if t == A.PAIR:
        return PairTerm("0", "0")
    return "0"


def _trunc_div(a: str, b: str) -> str:
    """Division rounding toward zero, from SMT-LIB's floor-like ``div``."""
    if re.fullmatch(r"\d+", b):
        return f"(ite (>= {a} 0) (div {a} {b}) (- (div (- {a}) {b})))"
    q = f"(div (ite (>= {a} 0) {a} (- {a})) (ite (>= {b} 0) {b} (- {b})))"
    return f"(ite (= (>= {a} 0) (>= {b} 0)) {q} (- {q}))"


def _unit(m: M.MonoidSpec):
    if m in (M.MAX, M.MIN):
        return Ext("true", "0")
    if m is M.PROD_PAIR:
        return PairTerm("1", "0")
    v = m.identity
    if isinstance(v, bool):
        return "true" if v else "false"
    return _int(v)


def _combine(m: M.MonoidSpec, a, b):
    if m is M.SUM:
        return f"(+ {a} {b})"
    if m is M.PRODUCT:
        return f"(* {a} {b})"
    if m is M.AND:
        return _and([a, b])
    if m is M.OR:
        return _or([a, b])
    if m is M.PROD_PAIR:
        return PairTerm(f"(* {a.p} {b.p})", f"(+ {a.c} {b.c})")
    if m in (M.MAX, M.MIN):
        pick_a = f"(>= {a.val} {b.val})" if m is M.MAX else f"(<= {a.val} {b.val})"
        # -inf is the unit of max, +inf the unit of min
        c = _or([b.inf, _and([_not(a.inf), pick_a])])
        return Ext(_and([a.inf, b.inf]), _ite(c, a.val, b.val))
    raise UnsupportedNode(f"combine on {m.name}")


def encode_chc(p: A.Program) -> ChcScript:
    """Horn clauses that are satisfiable iff no assertion of ``p`` fails."""
    return _Encoder(p).run()
