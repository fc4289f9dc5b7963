"""Normal form: array accesses, quantifiers, aggregates and nondet only as
the entire right-hand side of an assignment, with atomic arguments."""
from __future__ import annotations

from dataclasses import replace

from . import ast as A
from .typecheck import check, infer

_HEAVY = (A.Select, A.Store, A.Quant, A.Aggregate, A.Nondet)


class _Normalizer:
    def __init__(self, prog: A.Program):
        self.env = dict(prog.vocab)
        self.fresh = A.FreshNamer(A.all_names(prog))
        self.prelude: list[A.Decl] = []

    def lift(self, e) -> A.Var:
        name = self.fresh("t")
        ty = e.type if isinstance(e, A.Nondet) else infer(e, self.env)
        self.env[name] = ty
        self.prelude.append(A.Decl(name, ty, e))
        return A.Var(name)

    def norm(self, e, ctx: str):
        """ctx: top (whole rhs), free (no heavy nodes), atom, var."""
        match e:
            case A.Var():
                return e
            case A.IntLit() | A.BoolLit():
                return self.lift(e) if ctx == "var" else e
            case A.Nondet():
                return e if ctx == "top" else self.lift(e)
            case A.Select(a, i):
                node = A.Select(self.norm(a, "var"), self.norm(i, "atom"))
            case A.Store(a, i, v):
                node = A.Store(self.norm(a, "var"), self.norm(i, "atom"), self.norm(v, "atom"))
            case A.Quant(k, a, l, u, p):
                node = A.Quant(k, self.norm(a, "var"), self.norm(l, "atom"), self.norm(u, "atom"), p)
            case A.Aggregate(n, a, l, u, p):
                node = A.Aggregate(n, self.norm(a, "var"), self.norm(l, "atom"), self.norm(u, "atom"), p)
            case _:
                node = A.map_children(e, lambda c: self.norm(c, "free"))
                return self.lift(node) if ctx in ("atom", "var") else node
        return node if ctx == "top" else self.lift(node)

    def take(self) -> list[A.Decl]:
        out, self.prelude = self.prelude, []
        return out

    def stmt(self, s):
        match s:
            case A.Decl(n, ty, rhs) if rhs is not None:
                rhs2 = self.norm(rhs, "top")
                self.env[n] = ty
                return A.seq(*self.take(), replace(s, rhs=rhs2))
            case A.Decl(n, ty, None):
                self.env[n] = ty
                return s
            case A.Assign(n, rhs):
                rhs2 = self.norm(rhs, "top")
                return A.seq(*self.take(), replace(s, rhs=rhs2))
            case A.Assert(c) | A.Assume(c):
                c2 = self.norm(c, "free")
                return A.seq(*self.take(), replace(s, cond=c2))
            case A.If(c, t, e):
                c2 = self.norm(c, "free")
                pre = self.take()
                return A.seq(*pre, replace(s, cond=c2, then=self.stmt(t), els=self.stmt(e)))
            case A.While(c, b):
                c2 = self.norm(c, "free")
                pre = self.take()
                again = [A.Assign(d.name, d.rhs) for d in pre]
                return A.seq(*pre, replace(s, cond=c2, body=A.seq(self.stmt(b), *again)))
            case A.Seq(stmts):
                return A.seq(*(self.stmt(c) for c in stmts))
        return s


def normalize(p: A.Program) -> A.Program:
    """Return an equivalent program in normal form, renumbered.

    Temporaries are named ``t$k`` and introduced innermost-first,
    left-to-right.  Normal programs are returned unchanged.
    """
    p = check(p)
    n = _Normalizer(p)
    body = A.number(n.stmt(p.body))
    return A.Program(A.declarations(body), body)


def is_normal(p: A.Program) -> bool:
    return normalize(p) == p
