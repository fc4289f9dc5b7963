"""Pretty printer producing text that parses back to an equal AST."""
from __future__ import annotations

from . import ast as A

# binding strength, higher binds tighter
_OR, _AND, _EQ, _REL, _ADD, _MUL, _UNARY, _ATOM = range(1, 9)


def _neg_one(e) -> bool:
    return isinstance(e, A.IntLit) and e.value == -1


def _prec(e) -> int:
    match e:
        case A.Or():
            return _OR
        case A.And():
            return _AND
        case A.Eq() | A.Not(A.Eq()):
            return _EQ
        case A.Leq() | A.Not(A.Leq()):
            return _REL
        case A.Add():
            return _ADD
        case A.Mul() | A.Div():
            return _MUL
        case A.Not():
            return _UNARY
        case A.IntLit(v) if v < 0:
            return _UNARY
        case A.ExistsVars():
            return _UNARY
    return _ATOM


def expr_str(e) -> str:
    def wrap(x, min_prec):
        s = expr_str(x)
        return f"({s})" if _prec(x) < min_prec else s

    match e:
        case A.IntLit(v):
            return str(v)
        case A.BoolLit(v):
            return "true" if v else "false"
        case A.Var(n):
            return n
        case A.Meta(n):
            return "$" + n
        case A.Or(l, r):
            return f"{wrap(l, _OR)} || {wrap(r, _AND)}"
        case A.And(l, r):
            return f"{wrap(l, _AND)} && {wrap(r, _EQ)}"
        case A.Not(A.Eq(l, r)):
            return f"{wrap(l, _EQ)} != {wrap(r, _REL)}"
        case A.Eq(l, r):
            return f"{wrap(l, _EQ)} == {wrap(r, _REL)}"
        case A.Not(A.Leq(l, r)):
            # a < b is sugar for !(b <= a)
            return f"{wrap(r, _REL)} < {wrap(l, _ADD)}"
        case A.Leq(l, r):
            return f"{wrap(l, _REL)} <= {wrap(r, _ADD)}"
        case A.Add(l, A.Mul(m, r)) if _neg_one(m):
            return f"{wrap(l, _ADD)} - {wrap(r, _MUL)}"
        case A.Add(l, r):
            return f"{wrap(l, _ADD)} + {wrap(r, _MUL)}"
        case A.Mul(l, r):
            return f"{wrap(l, _MUL)} * {wrap(r, _UNARY)}"
        case A.Div(l, r):
            return f"{wrap(l, _MUL)} / {wrap(r, _UNARY)}"
        case A.Not(x):
            return f"!{wrap(x, _UNARY)}"
        case A.ConstArray(f):
            return f"const({expr_str(f)})"
        case A.Select(a, i):
            return f"select({expr_str(a)}, {expr_str(i)})"
        case A.Store(a, i, v):
            return f"store({expr_str(a)}, {expr_str(i)}, {expr_str(v)})"
        case A.Nondet():
            return "nondet"
        case A.Quant(k, a, l, u, p):
            return f"\\{k}({expr_str(a)}, {expr_str(l)}, {expr_str(u)}, {pred_str(p)})"
        case A.Aggregate(n, a, l, u, p):
            tail = "" if p is None else f", {pred_str(p)}"
            return f"\\{n}({expr_str(a)}, {expr_str(l)}, {expr_str(u)}{tail})"
        case A.MonoidOp(op, key, args, p):
            head = key if p is None else f"{key}, {pred_str(p)}"
            if op == "unit":
                return f"\\unit{{{head}}}"
            return f"\\{op}{{{head}}}({', '.join(expr_str(x) for x in args)})"
        case A.PredApp(v, i):
            return f"@P({expr_str(v)}, {expr_str(i)})"
        case A.ExistsVars(bound, body):
            bs = ", ".join(f"{t} {n}" for n, t in bound)
            return f"\\exists_vars({bs}). ({expr_str(body)})"
    raise TypeError(f"cannot print {e!r}")


def pred_str(p) -> str:
    if isinstance(p, A.PredRef):
        return "@P"
    return f"\\lambda({p.value_var}, {p.index_var}).({expr_str(p.body)})"


def _lhs(n) -> str:
    return "$" + n.name if isinstance(n, A.Meta) else n


def stmt_lines(s, indent: int = 0) -> list[str]:
    pad = "    " * indent
    match s:
        case A.Skip():
            return [pad + "skip;"]
        case A.Decl(n, t, rhs):
            init = "" if rhs is None else f" = {expr_str(rhs)}"
            return [f"{pad}{t} {_lhs(n)}{init};"]
        case A.Assign(n, rhs):
            return [f"{pad}{_lhs(n)} = {expr_str(rhs)};"]
        case A.Assert(c):
            return [f"{pad}assert({expr_str(c)});"]
        case A.Assume(c):
            return [f"{pad}assume({expr_str(c)});"]
        case A.Seq(stmts):
            return [line for c in stmts for line in stmt_lines(c, indent)]
        case A.While(c, b):
            return [f"{pad}while ({expr_str(c)}) {{", *stmt_lines(b, indent + 1), pad + "}"]
        case A.If(c, t, e):
            out = [f"{pad}if ({expr_str(c)}) {{", *stmt_lines(t, indent + 1)]
            if isinstance(e, A.Skip):
                return out + [pad + "}"]
            if isinstance(e, A.If):
                rest = stmt_lines(e, indent)
                return out + [pad + "} else " + rest[0].lstrip()] + rest[1:]
            return out + [pad + "} else {", *stmt_lines(e, indent + 1), pad + "}"]
    raise TypeError(f"cannot print {s!r}")


def pretty(p) -> str:
    body = p.body if isinstance(p, A.Program) else p
    return "\n".join(stmt_lines(body)) + "\n"
