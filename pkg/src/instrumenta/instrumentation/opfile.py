"""Operators written as text: the ``.op.toml`` format and its loader.

Layout::

    name = "square"

    [ghosts]
    x_sq = { type = "Int", init = "0" }

    [[rule]]
    id = "R4"
    pattern = "$y = $x * $x;"
    template = "assert($x == x_shad); $y = x_sq;"
    [rule.meta]
    y = "Int"
    x = "Int"

    [invariant]
    formula = "x_sq == x_shad * x_shad"

An optional ``[predicate] lambda = "\\lambda(x, i).(x == i)"`` fills
the ``@P`` placeholders.
"""
from __future__ import annotations

from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from ..lang import ast as A
from ..lang.parser import parse_expr, parse_stmt
from .operators import (GhostDecl, InstrumentationOperator, MetaSpec, RewriteRule,
                        _parse_type, resolve_pred)


class OperatorFileError(ValueError):
    pass


def make_rule(rule_id: str, pattern: str, template: str, meta: dict | None,
              pred: A.Lambda | None) -> RewriteRule:
    pat = parse_stmt(pattern, metas=True)
    if not isinstance(pat, A.Assign) or not isinstance(pat.name, A.Meta):
        raise OperatorFileError(f"rule {rule_id}: pattern must be `$v = ...;`")
    body = resolve_pred(parse_stmt(template, metas=True), pred)
    metas = {k: MetaSpec.parse(v) for k, v in (meta or {}).items()}
    return RewriteRule(rule_id, pat.name.name, resolve_pred(pat.rhs, pred), body, metas)


def make_operator(name: str, ghosts, rules, invariant: str, pred: A.Lambda | None = None,
                  aggregators=()) -> InstrumentationOperator:
    """``ghosts``: (name, type text, init text) triples; ``rules``: dicts
    with id, pattern, template and optional meta."""
    gs = tuple(GhostDecl(n, _parse_type(t), parse_expr(init)) for n, t, init in ghosts)
    rs = tuple(make_rule(r["id"], r["pattern"], r["template"], r.get("meta"), pred) for r in rules)
    inv = resolve_pred(parse_expr(invariant, metas=True), pred)
    return InstrumentationOperator(name, gs, rs, inv, tuple(aggregators))


def load_operator(path: str | Path, pred: A.Lambda | None = None) -> InstrumentationOperator:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as ex:
        raise OperatorFileError(f"{path}: {ex}") from None
    return operator_from_dict(doc, pred, default_name=path.name.split(".")[0])


def operator_from_dict(doc: dict, pred: A.Lambda | None = None,
                       default_name: str = "custom") -> InstrumentationOperator:
    if pred is None and "predicate" in doc:
        lam = parse_expr(f"\\forall(q, 0, 0, {doc['predicate']['lambda']})")
        pred = lam.pred
    ghosts = []
    for n, g in doc.get("ghosts", {}).items():
        if not isinstance(g, dict) or "type" not in g or "init" not in g:
            raise OperatorFileError(f"ghost {n}: needs type and init")
        ghosts.append((n, g["type"], str(g["init"])))
    rules = doc.get("rule", [])
    for r in rules:
        missing = {"id", "pattern", "template"} - set(r)
        if missing:
            raise OperatorFileError(f"rule {r.get('id', '?')}: missing {sorted(missing)}")
    inv = doc.get("invariant", {}).get("formula", "true")
    return make_operator(doc.get("name", default_name), ghosts, rules, inv, pred,
                         doc.get("aggregators", ()))


def dump_operator(op: InstrumentationOperator) -> str:
    """Render an operator in the ``.op.toml`` layout (predicates inlined)."""
    from ..lang.pretty import expr_str, stmt_lines

    def q(s: str) -> str:
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

    def ml(s: str) -> str:
        return "'''\n" + s + "'''"

    out = [f"name = {q(op.name)}", "", "[ghosts]"]
    for g in op.ghosts:
        out.append(f"{g.name} = {{ type = {q(str(g.type))}, init = {q(expr_str(g.init))} }}")
    for r in op.rules:
        pat = "\n".join(stmt_lines(A.Assign(A.Meta(r.lhs), r.rhs)))
        out += ["", "[[rule]]", f"id = {q(r.rule_id)}", f"pattern = {ml(pat + chr(10))}",
                f"template = {ml(chr(10).join(stmt_lines(r.template)) + chr(10))}"]
        if r.metas:
            out.append("[rule.meta]")
            out += [f"{k} = {q(str(v))}" for k, v in r.metas.items()]
    out += ["", "[invariant]", f"formula = {q(expr_str(op.invariant))}", ""]
    return "\n".join(out)
