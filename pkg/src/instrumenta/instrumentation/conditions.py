"""Executable check of the correctness conditions of an operator.

Each rule template is run on random pre-states that satisfy the
invariant, with meta-variables treated as ordinary program variables:

  init       the invariant holds at the initial ghost state
  terminate  the template finishes without a runtime fault
  frame      it assigns only to the rule's left-hand side and ghosts
  preserve   with assertions read as assumptions, the invariant holds after
  agree      with assertions read as assumptions, the left-hand side
             ends up equal to the pattern's right-hand side evaluated
             before the template ran
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .. import monoids as M
from ..lang import ast as A
from ..semantics import Compiler, EvalError, FunArray, Machine, value_to_json
from .operators import InstrumentationOperator, RewriteRule, _inst, instantiate

CONDITIONS = ("init", "terminate", "frame", "preserve", "agree")


@dataclass
class ConditionResult:
    condition: str
    rule: str | None
    passed: bool
    counterexample: dict | None = None
    detail: str = ""
    samples: int = 0

    def to_json(self) -> dict:
        return {"condition": self.condition, "rule": self.rule, "passed": self.passed,
                "samples": self.samples, "detail": self.detail,
                "counterexample": self.counterexample}


@dataclass
class ConditionReport:
    operator: str
    seed: int
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[ConditionResult]:
        return [r for r in self.results if not r.passed]

    def to_json(self) -> dict:
        return {"operator": self.operator, "seed": self.seed, "passed": self.passed,
                "results": [r.to_json() for r in self.results]}


# ------------------------------------------------------------- sampling

class StateSampler:
    """Random values per type, biased so that guards of the interval
    operators are hit often: arrays copy each other, integers cluster
    around the integers already drawn."""

    def __init__(self, rng: random.Random, lo: int, hi: int):
        self.rng, self.lo, self.hi = rng, lo, hi

    def value(self, t: A.Type, pool: dict | None = None):
        rng = self.rng
        pool = pool or {}
        if isinstance(t, A.ArrayT):
            same = [v for v in pool.values() if isinstance(v, FunArray) and self._elem_ok(v, t)]
            if same and rng.random() < 0.6:
                a = rng.choice(same)
                if rng.random() < 0.3:
                    a = a.set(rng.randint(self.lo, self.hi), self.value(t.elem))
                return a
            entries = {k: self.value(t.elem) for k in range(self.lo, self.hi + 1) if rng.random() < 0.6}
            return FunArray(self._default(t.elem), entries)
        if t == A.BOOL:
            return rng.random() < 0.5
        if t == A.NEG_INF_INT and rng.random() < 0.15:
            return M.NEG_INF
        if t == A.POS_INF_INT and rng.random() < 0.15:
            return M.POS_INF
        if t == A.PAIR:
            p = rng.choice([v for v in range(self.lo, self.hi + 1) if v != 0] or [1])
            return M.Pair(p, rng.randint(0, 2))
        ints = [v for v in pool.values() if isinstance(v, int) and not isinstance(v, bool)]
        if ints and rng.random() < 0.5:
            return rng.choice(ints) + rng.choice((-1, 0, 0, 1))
        return rng.randint(self.lo, self.hi)

    @staticmethod
    def _default(t):
        return False if t == A.BOOL else 0

    @staticmethod
    def _elem_ok(a: FunArray, t: A.ArrayT) -> bool:
        return isinstance(a.default, bool) == (t.elem == A.BOOL)


def _disjuncts(e):
    if isinstance(e, A.Or):
        return _disjuncts(e.l) + _disjuncts(e.r)
    return [e]


def _conjuncts(e):
    if isinstance(e, A.And):
        return _conjuncts(e.l) + _conjuncts(e.r)
    return [e]


class InvariantSampler:
    """Draws ghost states satisfying the invariant by sampling and then
    solving the equalities of one randomly chosen disjunct."""

    def __init__(self, op: InstrumentationOperator, sampler: StateSampler, comp: Compiler):
        self.op = op
        self.sampler = sampler
        self.comp = comp
        self.ghosts = {g.name for g in op.ghosts}
        self.inv = comp(op.invariant)
        self.cases = [[c for c in _conjuncts(d) if isinstance(c, A.Eq)] for d in _disjuncts(op.invariant)]

    def holds(self, env) -> bool:
        try:
            return bool(self.inv(env))
        except EvalError:
            return False

    def draw(self, extra_types: dict, tries: int = 60) -> dict | None:
        s = self.sampler
        for _ in range(tries):
            env: dict = {}
            for g in self.op.ghosts:
                env[g.name] = s.value(g.type, env)
            eqs = s.rng.choice(self.cases)
            for _ in range(2):
                for eq in eqs:
                    for lhs, rhs in ((eq.l, eq.r), (eq.r, eq.l)):
                        if isinstance(lhs, A.Var) and lhs.name in self.ghosts:
                            try:
                                env[lhs.name] = self.comp(rhs)(env)
                            except EvalError:
                                pass
                            break
            if not self.holds(env):
                continue
            for n, t in extra_types.items():
                env[n] = s.value(t, env)
            return env
        return None


# ------------------------------------------------------------- running

def _assumed(s):
    """The template with every assertion read as an assumption."""
    match s:
        case A.Assert(c):
            return A.Assume(c)
        case A.Seq(stmts):
            return A.Seq(tuple(_assumed(c) for c in stmts))
        case A.If(c, t, e):
            return A.If(c, _assumed(t), _assumed(e))
        case A.While(c, b):
            return A.While(c, _assumed(b))
    return s


def _assigned(s) -> set:
    return {t.name for t in A.walk(s) if isinstance(t, (A.Assign, A.Decl))}


def meta_types(rule: RewriteRule) -> dict:
    names = {x.name for x in A.subexprs(rule.rhs) if isinstance(x, A.Meta)} | {rule.lhs}
    for t in A.walk(rule.template):
        for e in A.stmt_exprs(t):
            names |= {x.name for x in A.subexprs(e) if isinstance(x, A.Meta)}
    return {n: (rule.spec(n).type or A.INT) for n in sorted(names)}


class _Runner:
    def __init__(self, body):
        prog = A.Program({}, A.number(body))
        self.m = Machine(prog, budget=10_000, record=False)
        self.body = prog.body

    def __call__(self, env):
        res = self.m.run((env, [self.body], 0, None), lambda s, t: [])
        return res[0], res[1][0], (res[3] if res[0] == "error" else None)


def _snapshot(env: dict) -> dict:
    return {k: value_to_json(v) for k, v in sorted(env.items())}


def check_rule(op: InstrumentationOperator, rule: RewriteRule, inv: InvariantSampler,
               samples: int, comp: Compiler) -> list[ConditionResult]:
    types = meta_types(rule)
    clash = set(types) & inv.ghosts
    if clash:
        raise ValueError(f"meta names {sorted(clash)} clash with ghosts")
    sub = {n: A.Var(n) for n in types}
    body = instantiate(rule.template, sub)
    run_s, run_assumed = _Runner(body), _Runner(_assumed(body))
    rhs = comp(_inst(rule.rhs, sub)[0])
    lhs = rule.lhs
    allowed = inv.ghosts | {lhs}

    bad_writes = {n if isinstance(n, str) else f"${n.name}" for n in _assigned(rule.template)}
    bad_writes -= inv.ghosts | {f"${lhs}"}
    res = {c: ConditionResult(c, rule.rule_id, True) for c in ("terminate", "frame", "preserve", "agree")}
    if bad_writes:
        res["frame"] = ConditionResult("frame", rule.rule_id, False, None,
                                       f"assigns to {sorted(bad_writes)}")

    def fail(cond, pre, detail):
        if res[cond].passed:
            res[cond] = ConditionResult(cond, rule.rule_id, False, _snapshot(pre), detail)

    used = 0
    for _ in range(samples):
        pre = inv.draw(types)
        if pre is None:
            continue
        used += 1
        tag, post, kind = run_s(dict(pre))
        if tag in ("error", "budget"):
            fail("terminate", pre, kind or "step budget exhausted")
        elif tag in ("done", "assert"):
            changed = [n for n in pre if n not in allowed and post.get(n) != pre[n]]
            if changed:
                fail("frame", pre, f"changed {changed}")
        try:
            expected = rhs(pre)
        except EvalError:
            expected = None
        tag, post, kind = run_assumed(dict(pre))
        if tag == "error":
            fail("terminate", pre, kind)
            continue
        if tag != "done":
            continue
        if not inv.holds(post):
            fail("preserve", pre, "invariant false afterwards")
        if expected is not None and post.get(lhs) != expected:
            fail("agree", pre, f"${lhs} = {post.get(lhs)!r}, expected {expected!r}")
    for r in res.values():
        r.samples = used
    if used == 0:
        for r in res.values():
            if r.passed:
                r.passed = False
                r.detail = "no pre-state satisfying the invariant was found"
    return list(res.values())


def check_operator_conditions(op: InstrumentationOperator, samples: int = 10_000,
                              value_range: tuple[int, int] = (-4, 4), seed: int = 0) -> ConditionReport:
    rng = random.Random(seed)
    comp = Compiler()
    report = ConditionReport(op.name, seed)
    init: dict = {}
    try:
        for g in op.ghosts:
            init[g.name] = comp(g.init)(init)
        ok = bool(comp(op.invariant)(init))
    except EvalError as ex:
        ok = False
        report.results.append(ConditionResult("init", None, False, _snapshot(init), ex.kind))
    else:
        report.results.append(ConditionResult("init", None, ok, None if ok else _snapshot(init),
                                              "" if ok else "invariant false initially", 1))
    inv = InvariantSampler(op, StateSampler(rng, *value_range), comp)
    for rule in op.rules:
        report.results.extend(check_rule(op, rule, inv, samples, comp))
    return report


# ------------------------------------------------------------- mutants

def delete_statement(op: InstrumentationOperator, rule_id: str, text: str) -> InstrumentationOperator:
    """A copy of ``op`` with the first template statement printing as
    ``text`` removed from rule ``rule_id``."""
    from ..lang.pretty import stmt_lines
    done = [False]

    def drop(s):
        match s:
            case A.Seq(stmts):
                kept = []
                for c in stmts:
                    if not done[0] and not isinstance(c, (A.Seq, A.If, A.While)) \
                            and stmt_lines(c)[0].strip() == text:
                        done[0] = True
                        continue
                    kept.append(drop(c))
                return A.seq(*kept)
            case A.If(c, t, e):
                return A.If(c, drop(t), drop(e))
        return s

    rules = []
    for r in op.rules:
        if r.rule_id == rule_id:
            r = replace(r, template=drop(A.seq(r.template)))
        rules.append(r)
    if not done[0]:
        raise ValueError(f"{text!r} not found in rule {rule_id}")
    return replace(op, name=f"{op.name}-without[{rule_id}:{text}]", rules=tuple(rules))


def standard_mutants() -> list[InstrumentationOperator]:
    """Eight broken operators, each missing one ghost update or assertion."""
    from .builtins import builtin_operator
    eq = A.Lambda("x", "i", A.Eq(A.Var("x"), A.Var("i")))
    sq = builtin_operator("square")
    sm = builtin_operator("sum")
    return [
        delete_statement(sq, "R2", "x_shad = $y;"),
        delete_statement(sq, "R2", "assert($x == x_shad);"),
        delete_statement(sq, "R4", "assert($x == x_shad);"),
        delete_statement(builtin_operator("max"), "store", "ag_ar = $b;"),
        delete_statement(sm, "store", "assert(ag_ar == $a);"),
        delete_statement(sm, "aggregate", "assert(ag_ar == $a && $l == ag_lo && $u == ag_hi);"),
        delete_statement(builtin_operator("forall", eq), "store", "qu_P = qu_P && $x == $i;"),
        delete_statement(builtin_operator("numof", eq), "select", "ag_ar = $a;"),
    ]
