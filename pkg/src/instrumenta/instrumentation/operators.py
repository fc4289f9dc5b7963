"""Instrumentation operators: rules with meta-variables, matching,
statement rewriting, whole-program application and composition."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..lang import ast as A
from ..lang.typecheck import IllTyped, check, infer

BOT = None  # the "leave unchanged" choice


class GhostNameClash(Exception):
    pass


class InvalidSelection(ValueError):
    pass


class UnknownOperator(KeyError):
    pass


@dataclass(frozen=True)
class MetaSpec:
    """What a meta-variable may stand for.

    kind is ``var`` (a program variable), ``atom`` (variable or
    literal), ``expr`` (any pure expression) or ``lit`` (an integer
    literal).  ``type`` constrains the match when given.
    """
    kind: str = "var"
    type: A.Type | None = None

    @classmethod
    def parse(cls, text: str) -> "MetaSpec":
        text = text.strip()
        if text == "lit":
            return cls("lit", A.INT)
        for kind in ("atom", "expr", "var"):
            if text.startswith(kind + " ") or text == kind:
                rest = text[len(kind):].strip()
                return cls(kind, _parse_type(rest) if rest else None)
        return cls("var", _parse_type(text))

    def __str__(self) -> str:
        if self.kind == "lit":
            return "lit"
        head = "" if self.kind == "var" and self.type is not None else self.kind
        return " ".join(x for x in (head, str(self.type) if self.type else "") if x)


def _parse_type(text: str) -> A.Type:
    words = text.split()
    depth = 0
    while words and words[0] == "Array":
        depth += 1
        words.pop(0)
    if len(words) != 1 or words[0] not in A.PRIM_TYPES:
        raise ValueError(f"bad type {text!r}")
    t: A.Type = A.PRIM_TYPES[words[0]]
    for _ in range(depth):
        t = A.ArrayT(t)
    return t


@dataclass(frozen=True)
class RewriteRule:
    rule_id: str
    lhs: str  # meta name of the assigned variable
    rhs: object  # pattern expression over Meta nodes
    template: A.Stmt
    metas: dict = field(default_factory=dict, compare=False, hash=False)

    def spec(self, name: str) -> MetaSpec:
        return self.metas.get(name, MetaSpec())


@dataclass(frozen=True)
class GhostDecl:
    name: str
    type: A.Type
    init: object  # closed expression giving the initial value


@dataclass(frozen=True)
class InstrumentationOperator:
    name: str
    ghosts: tuple[GhostDecl, ...]
    rules: tuple[RewriteRule, ...]
    invariant: object
    aggregators: tuple[str, ...] = ()

    def rule(self, rule_id: str) -> RewriteRule:
        for r in self.rules:
            if r.rule_id == rule_id:
                return r
        raise KeyError(rule_id)

    @property
    def ghost_names(self) -> list[str]:
        return [g.name for g in self.ghosts]

    def ghost_env(self) -> dict:
        return {g.name: g.type for g in self.ghosts}


EMPTY = InstrumentationOperator("empty", (), (), A.BoolLit(True))


# ------------------------------------------------------------ predicates

def resolve_pred(x, pred: A.Lambda | None):
    """Replace ``@P`` placeholders by ``pred`` in an expression or statement."""
    if isinstance(x, A.Program):
        return replace(x, body=resolve_pred(x.body, pred))
    if isinstance(x, (A.Skip, A.Decl, A.Assign, A.Seq, A.While, A.If, A.Assert, A.Assume)):
        return _map_stmt_exprs(x, lambda e: resolve_pred(e, pred))
    e = x
    if isinstance(e, A.PredApp):
        if pred is None:
            raise ValueError("operator uses @P but no predicate was given")
        return A.apply_pred(pred, resolve_pred(e.value, pred), resolve_pred(e.index, pred))
    out = A.map_children(e, lambda c: resolve_pred(c, pred))
    if isinstance(out, (A.Quant, A.Aggregate, A.MonoidOp)) and isinstance(out.pred, A.PredRef):
        if pred is None:
            raise ValueError("operator uses @P but no predicate was given")
        out = replace(out, pred=pred)
    return out


def _map_stmt_exprs(s, f):
    match s:
        case A.Decl(_, _, rhs):
            return replace(s, rhs=None if rhs is None else f(rhs))
        case A.Assign(_, rhs):
            return replace(s, rhs=f(rhs))
        case A.Seq(stmts):
            return replace(s, stmts=tuple(_map_stmt_exprs(c, f) for c in stmts))
        case A.While(c, b):
            return replace(s, cond=f(c), body=_map_stmt_exprs(b, f))
        case A.If(c, t, e):
            return replace(s, cond=f(c), then=_map_stmt_exprs(t, f), els=_map_stmt_exprs(e, f))
        case A.Assert(c) | A.Assume(c):
            return replace(s, cond=f(c))
    return s


# -------------------------------------------------------------- matching

_HEAVY = (A.Select, A.Store, A.Quant, A.Aggregate, A.Nondet, A.MonoidOp, A.ExistsVars)


def _type_of(e, env):
    match e:
        case A.IntLit():
            return A.INT
        case A.BoolLit():
            return A.BOOL
        case A.Var(n):
            return env.get(n)
    try:
        return infer(e, env)
    except (IllTyped, KeyError):
        return None


def _fits(spec: MetaSpec, e, env) -> bool:
    match spec.kind:
        case "lit":
            return isinstance(e, A.IntLit)
        case "var":
            ok = isinstance(e, A.Var)
        case "atom":
            ok = isinstance(e, (A.Var, A.IntLit, A.BoolLit))
        case _:
            ok = not any(isinstance(x, _HEAVY) for x in A.subexprs(e))
    if not ok:
        return False
    return spec.type is None or _type_of(e, env) == spec.type


def _match(pat, e, rule: RewriteRule, env, sub: dict) -> bool:
    if isinstance(pat, A.Meta):
        if pat.name in sub:
            return sub[pat.name] == e
        if not _fits(rule.spec(pat.name), e, env):
            return False
        sub[pat.name] = e
        return True
    if isinstance(pat, A.Lambda):
        return isinstance(e, A.Lambda) and A.alpha_equal(pat, e)
    if type(pat) is not type(e):
        return False
    if isinstance(pat, (A.Quant, A.Aggregate, A.MonoidOp)):
        head_p = [getattr(pat, f) for f in pat.__dataclass_fields__ if f not in ("array", "lo", "hi", "args", "pred")]
        head_e = [getattr(e, f) for f in e.__dataclass_fields__ if f not in ("array", "lo", "hi", "args", "pred")]
        if head_p != head_e:
            return False
        if (pat.pred is None) != (e.pred is None):
            return False
        if pat.pred is not None and not _match(pat.pred, e.pred, rule, env, sub):
            return False
    elif not A.children(pat):
        return pat == e
    cp, ce = A.children(pat), A.children(e)
    return len(cp) == len(ce) and all(_match(p, x, rule, env, sub) for p, x in zip(cp, ce))


@dataclass(frozen=True)
class Match:
    subst: dict
    lhs_occurs: bool


def match_rule(rule: RewriteRule, stmt, env: dict) -> Match | None:
    """Match an assignment (or initialized declaration) against a rule."""
    if not isinstance(stmt, (A.Assign, A.Decl)) or stmt.rhs is None:
        return None
    sub: dict = {}
    if not _match(A.Meta(rule.lhs), A.Var(stmt.name), rule, env, sub):
        return None
    if not _match(rule.rhs, stmt.rhs, rule, env, sub):
        return None
    return Match(sub, stmt.name in A.free_vars(stmt.rhs))


# ------------------------------------------------------------- rewriting

def _inst(e, sub: dict):
    """Substitute metas, folding literal arithmetic the substitution created."""
    if isinstance(e, A.Meta):
        return sub[e.name], True
    if isinstance(e, A.Lambda):
        body, hit = _inst(e.body, sub)
        return A.Lambda(e.value_var, e.index_var, body), hit
    hits = []

    def f(c):
        c2, h = _inst(c, sub)
        hits.append(h)
        return c2

    out = A.map_children(e, f)
    if isinstance(out, (A.Quant, A.Aggregate, A.MonoidOp)) and isinstance(out.pred, A.Lambda):
        lam, h = _inst(out.pred, sub)
        hits.append(h)
        out = replace(out, pred=lam)
    hit = any(hits)
    if hit and isinstance(out, (A.Add, A.Mul)) and isinstance(out.l, A.IntLit) and isinstance(out.r, A.IntLit):
        v = out.l.value + out.r.value if isinstance(out, A.Add) else out.l.value * out.r.value
        return A.IntLit(v), True
    return out, hit


def instantiate(template, sub: dict):
    """A fresh copy of ``template`` with metas replaced."""
    def name(n):
        if isinstance(n, A.Meta):
            v = sub[n.name]
            if not isinstance(v, A.Var):
                raise ValueError(f"meta ${n.name} assigned but bound to {v}")
            return v.name
        return n

    def ex(e):
        return _inst(e, sub)[0]

    match template:
        case A.Skip():
            return A.Skip()
        case A.Decl(n, t, rhs):
            return A.Decl(name(n), t, None if rhs is None else ex(rhs))
        case A.Assign(n, rhs):
            return A.Assign(name(n), ex(rhs))
        case A.Seq(stmts):
            return A.Seq(tuple(instantiate(c, sub) for c in stmts))
        case A.While(c, b):
            return A.While(ex(c), instantiate(b, sub))
        case A.If(c, t, e):
            return A.If(ex(c), instantiate(t, sub), instantiate(e, sub))
        case A.Assert(c):
            return A.Assert(ex(c))
        case A.Assume(c):
            return A.Assume(ex(c))
    raise TypeError(template)


def rewrite_statement(rule: RewriteRule, stmt, env: dict, fresh: A.FreshNamer):
    """The replacement block for ``stmt``, or None if the rule does not match.

    A declaration ``T v = e`` becomes ``T v;`` followed by the rewrite of
    ``v = e``.  When ``v`` occurs in ``e`` the assignment is split into
    ``v' = e; v = v'`` and the first half is rewritten.
    """
    m = match_rule(rule, stmt, env)
    if m is None:
        return None
    out = []
    v = stmt.name
    ty = stmt.type if isinstance(stmt, A.Decl) else env[v]
    if isinstance(stmt, A.Decl):
        out.append(A.Decl(v, ty, None))
    if m.lhs_occurs:
        v2 = fresh(v)
        sub = dict(m.subst)
        sub[rule.lhs] = A.Var(v2)
        out.append(A.Decl(v2, ty, None))
        out.append(instantiate(rule.template, sub))
        out.append(A.Assign(v, A.Var(v2)))
    else:
        out.append(instantiate(rule.template, m.subst))
    return A.seq(*out)


# ---------------------------------------------------------------- spaces

def _rewritable(s) -> bool:
    return isinstance(s, (A.Assign, A.Decl)) and s.rhs is not None


def instrumentation_space(p: A.Program, op: InstrumentationOperator) -> dict[int, list]:
    """Map each matchable control point to its choices, BOT last."""
    env = dict(p.vocab)
    space = {}
    for s in A.walk(p.body):
        if not _rewritable(s):
            continue
        ids = [r.rule_id for r in op.rules if match_rule(r, s, env) is not None]
        if ids:
            space[s.pid] = ids + [BOT]
    return space


def space_size(space: dict) -> int:
    n = 1
    for qs in space.values():
        n *= len(qs)
    return n


def full_selection(space: dict) -> dict:
    return {p: qs[0] for p, qs in space.items()}


def validate_selection(space: dict, sel: dict) -> dict:
    out = {}
    for p, choice in sel.items():
        if p not in space:
            raise InvalidSelection(f"point {p} is not rewritable")
        if choice not in space[p]:
            raise InvalidSelection(f"rule {choice!r} does not apply at point {p}")
        out[p] = choice
    return {p: out.get(p, BOT) for p in space}


# ------------------------------------------------------------ application

@dataclass
class InstrumentedProgram:
    program: A.Program
    point_map: dict  # original point -> first point of its image
    owner: dict  # instrumented point -> original point, absent for ghost code
    regions: dict  # original point -> instrumented points of its rewrite
    added_asserts: set
    selection: dict
    operator: InstrumentationOperator
    original: A.Program | None = None

    def originals_on(self, points) -> set:
        return {self.owner[q] for q in points if q in self.owner}


def _number_tracking(body):
    """Number ``body`` and report the new id of every node object."""
    ids: dict[int, int] = {}
    counter = [0]

    def go(t):
        pid = counter[0]
        counter[0] += 1
        ids[id(t)] = pid
        match t:
            case A.Seq(stmts):
                return A.Seq(tuple(go(c) for c in stmts), pid=pid)
            case A.While(c, b):
                return A.While(c, go(b), pid=pid)
            case A.If(c, th, el):
                th2 = go(th)
                return A.If(c, th2, go(el), pid=pid)
        return replace(t, pid=pid)

    return go(body), ids


def freshen_operator(op: InstrumentationOperator, taken, fresh: A.FreshNamer | None = None,
                     allow: bool = True) -> InstrumentationOperator:
    clash = [g.name for g in op.ghosts if g.name in taken]
    if not clash:
        return op
    if not allow:
        raise GhostNameClash(", ".join(clash))
    fresh = fresh or A.FreshNamer(taken)
    return rename_ghosts(op, {n: fresh(n) for n in clash})


def rename_ghosts(op: InstrumentationOperator, mapping: dict) -> InstrumentationOperator:
    from ..semantics import _rename_expr, rename_stmt

    def ren(n):
        return mapping.get(n, n) if isinstance(n, str) else n

    ghosts = tuple(GhostDecl(ren(g.name), g.type, _rename_expr(g.init, ren)) for g in op.ghosts)
    rules = tuple(replace(r, template=rename_stmt(r.template, ren)) for r in op.rules)
    return replace(op, ghosts=ghosts, rules=rules, invariant=_rename_expr(op.invariant, ren))


def instrument(p: A.Program, op: InstrumentationOperator, sel: dict | None = None,
               fresh: A.FreshNamer | None = None, allow_freshening: bool = True) -> InstrumentedProgram:
    """Apply ``op`` at the points chosen by ``sel`` (missing points: BOT)."""
    space = instrumentation_space(p, op)
    sel = validate_selection(space, sel or {})
    taken = A.all_names(p)
    fresh = fresh or A.FreshNamer(taken)
    op = freshen_operator(op, taken, fresh, allow_freshening)
    env = dict(p.vocab)
    env.update(op.ghost_env())

    blocks: dict[int, object] = {}  # original pid -> replacement block
    images: dict[int, object] = {}  # original pid -> node standing for it

    def go(s):
        match s:
            case A.Seq(stmts):
                node = A.Seq(tuple(go(c) for c in stmts), pid=s.pid)
            case A.While(c, b):
                node = A.While(c, go(b), pid=s.pid)
            case A.If(c, t, e):
                node = A.If(c, go(t), go(e), pid=s.pid)
            case _:
                choice = sel.get(s.pid, BOT)
                if choice is BOT:
                    node = s
                else:
                    block = rewrite_statement(op.rule(choice), s, env, fresh)
                    # a separate node, so its extent stays visible
                    blocks[s.pid] = block = A.Seq(_splice(block))
                    for d in A.walk(block):
                        if isinstance(d, A.Decl):
                            env.setdefault(d.name, d.type)
                    return block
        images[s.pid] = node
        return node

    new_body = go(p.body)
    prefix = [A.Decl(g.name, g.type, g.init) for g in op.ghosts]
    whole = A.Seq((*prefix, *_splice(new_body)))
    numbered, ids = _number_tracking(whole)
    prog, renum = _flatten_program(numbered)

    def new_id(node):
        old = ids.get(id(node))
        return None if old is None else renum.get(old)

    owner: dict[int, int] = {}
    point_map: dict[int, int] = {}
    regions: dict[int, set] = {}
    added: set[int] = set()
    for s in A.walk(p.body):
        if s.pid in blocks:
            pts = set()
            for t in A.walk(blocks[s.pid]):
                q = new_id(t)
                if q is None:
                    continue
                pts.add(q)
                owner[q] = s.pid
                if isinstance(t, A.Assert):
                    added.add(q)
            regions[s.pid] = pts
            point_map[s.pid] = min(pts)
        else:
            q = new_id(images.get(s.pid))
            if q is None:
                continue  # a sequence dissolved by flattening
            owner[q] = s.pid
            point_map[s.pid] = q
            regions[s.pid] = {q}
    return InstrumentedProgram(prog, point_map, owner, regions, added, sel, op, p)


def _splice(body):
    return body.stmts if isinstance(body, A.Seq) else (body,)


def _flatten_program(numbered):
    """Flatten nested sequences and renumber densely.

    Returns the program and a map from old ids to new ids; the ids of
    dissolved sequence nodes are dropped.
    """
    def flat(s):
        match s:
            case A.Seq(stmts):
                out = []
                for c in stmts:
                    c2 = flat(c)
                    out.extend(c2.stmts if isinstance(c2, A.Seq) else (c2,))
                return A.Seq(tuple(out), pid=s.pid)
            case A.While(c, b):
                return A.While(c, flat(b), pid=s.pid)
            case A.If(c, t, e):
                return A.If(c, flat(t), flat(e), pid=s.pid)
        return s

    tmp = flat(numbered)
    old_ids = [t.pid for t in A.walk(tmp)]
    renum = A.number(tmp)
    new_ids = [t.pid for t in A.walk(renum)]
    mapping = dict(zip(old_ids, new_ids))
    return A.Program(A.declarations(renum), renum), mapping


# ----------------------------------------------------------- composition

def _qualified(op: InstrumentationOperator, tag: str) -> InstrumentationOperator:
    rules = tuple(r if "." in r.rule_id else replace(r, rule_id=f"{tag}.{r.rule_id}") for r in op.rules)
    return replace(op, rules=rules)


def compose(o1: InstrumentationOperator, o2: InstrumentationOperator,
            fresh: A.FreshNamer | None = None) -> InstrumentationOperator:
    """Union of ghosts and rules, conjunction of invariants.

    Ghosts of ``o2`` that clash with ``o1`` are renamed; rule ids are
    qualified by operator name so they stay distinct.
    """
    if not o2.ghosts and not o2.rules:
        return o1
    if not o1.ghosts and not o1.rules:
        return o2
    names1 = set(o1.ghost_names)
    fresh = fresh or A.FreshNamer(names1 | set(o2.ghost_names))
    o2 = freshen_operator(o2, names1, fresh)
    tag1 = o1.name
    tag2 = o2.name if o2.name != o1.name else f"{o2.name}#2"
    q1, q2 = _qualified(o1, tag1), _qualified(o2, tag2)
    ids1 = {r.rule_id for r in q1.rules}
    rules2 = []
    for r in q2.rules:
        rid = r.rule_id
        k = 2
        while rid in ids1:
            rid = f"{r.rule_id}#{k}"
            k += 1
        rules2.append(replace(r, rule_id=rid))
    return InstrumentationOperator(
        f"{o1.name}+{tag2}", o1.ghosts + o2.ghosts, q1.rules + tuple(rules2),
        A.And(o1.invariant, o2.invariant), o1.aggregators + o2.aggregators)


# --------------------------------------------------------------- helpers

def check_instrumented(ip: InstrumentedProgram) -> A.Program:
    """Type check the instrumented program (raises IllTyped)."""
    return check(ip.program)


def collapse_split_temporaries(p: A.Program) -> A.Program:
    """Undo the ``v' = e; ...; v = v'`` split of rewriting.

    Used to compare against listings that rewrite in place.  A
    declaration ``T v$k;`` followed later in the same sequence by
    ``v = v$k;`` is removed, the temporary renamed back to ``v`` and the
    copy dropped.
    """
    from ..semantics import rename_stmt

    def go(s):
        match s:
            case A.Seq(stmts):
                items = [go(c) for c in stmts]
                changed = True
                while changed:
                    changed = False
                    for k, d in enumerate(items):
                        if not (isinstance(d, A.Decl) and d.rhs is None and "$" in d.name):
                            continue
                        for j in range(k + 1, len(items)):
                            c = items[j]
                            if (isinstance(c, A.Assign) and c.rhs == A.Var(d.name)
                                    and c.name == d.name.split("$")[0]):
                                ren = {d.name: c.name}
                                mid = [rename_stmt(x, lambda n: ren.get(n, n)) for x in items[k + 1:j]]
                                items = items[:k] + mid + items[j + 1:]
                                changed = True
                                break
                        if changed:
                            break
                return A.seq(*items)
            case A.While(c, b):
                return A.While(c, go(b))
            case A.If(c, t, e):
                return A.If(c, go(t), go(e))
        return s

    body = A.number(go(p.body))
    return A.Program(A.declarations(body), body)
