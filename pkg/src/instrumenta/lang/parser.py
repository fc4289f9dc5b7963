"""Lexer and recursive-descent parser for ``.cw`` source text.

Surface sugar accepted on top of the core grammar and desugared here:
``<``, ``>``, ``>=``, ``!=``, binary and unary ``-``, ``a[i]`` reads,
``a[i] = x;`` writes, ``if`` without ``else`` and uninitialised
declarations ``T v;``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast as A


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int, expected: frozenset[str] = frozenset()):
        self.msg = msg
        self.line = line
        self.col = col
        self.expected = expected
        exp = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{line}:{col}: {msg}{exp}")


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, fresh, meta, bskw, op, eof
    text: str
    line: int
    col: int


KEYWORDS = {
    "Int", "Bool", "Array", "true", "false", "skip", "while", "if", "else",
    "assert", "assume", "nondet", "const", "select", "store",
} | set(A.PRIM_TYPES)

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<fresh>[A-Za-z_][A-Za-z0-9_]*\$\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<meta>\$[A-Za-z_][A-Za-z0-9_]*)
  | (?P<at>@P)
  | (?P<bskw>\\[A-Za-z_]+)
  | (?P<lam>λ)
  | (?P<op>==|!=|<=|>=|&&|\|\||[<>=!+\-*/(){}\[\],;.])
""", re.VERBOSE | re.DOTALL)


def tokenize(text: str, *, fresh_names: bool = False, metas: bool = False) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "fresh" and not fresh_names:
            raise ParseError(f"identifier {tok!r} uses the reserved '$' suffix", line, col)
        if kind == "meta" and not metas:
            raise ParseError(f"meta-variable {tok!r} outside an operator file", line, col)
        if kind == "at" and not metas:
            raise ParseError("predicate placeholder outside an operator file", line, col)
        if kind == "lam":
            kind = "bskw"
            tok = "\\lambda"
        if kind == "fresh":
            kind = "ident"
        if kind not in ("ws", "lcomment", "bcomment"):
            out.append(Token(kind, tok, line, col))
        nl = tok.count("\n") if kind in ("ws", "bcomment") else 0
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class Parser:
    def __init__(self, text: str, *, fresh_names: bool = False, metas: bool = False):
        self.toks = tokenize(text, fresh_names=fresh_names, metas=metas)
        self.pos = 0

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("op", "ident", "bskw") and t.text in texts

    def error(self, msg: str, expected=()):
        raise ParseError(msg, self.tok.line, self.tok.col, frozenset(expected))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"unexpected {found!r}", {text})
        t = self.tok
        self.pos += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error(f"unexpected {t.text or 'end of input'!r}", {"identifier"})
        self.pos += 1
        return t.text

    def name_or_meta(self):
        if self.tok.kind == "meta":
            self.pos += 1
            return A.Meta(self.toks[self.pos - 1].text[1:])
        return self.ident()

    # -- types

    def starts_type(self) -> bool:
        return self.tok.kind == "ident" and (self.tok.text in A.PRIM_TYPES or self.tok.text == "Array")

    def type_(self) -> A.Type:
        if self.accept("Array"):
            return A.ArrayT(self.type_())
        t = self.tok
        if t.kind == "ident" and t.text in A.PRIM_TYPES:
            self.pos += 1
            return A.PRIM_TYPES[t.text]
        self.error(f"unexpected {t.text or 'end of input'!r}", {"Int", "Bool", "Array"})

    # -- statements

    def program_stmt(self) -> A.Stmt:
        stmts = []
        while self.tok.kind != "eof":
            stmts.append(self.stmt())
        return A.seq(*stmts)

    def block(self) -> A.Stmt:
        if self.accept("{"):
            stmts = []
            while not self.at("}"):
                if self.tok.kind == "eof":
                    self.error("unexpected end of input", {"}"})
                stmts.append(self.stmt())
            self.expect("}")
            return A.seq(*stmts)
        return self.stmt()

    def end_stmt(self):
        """``;`` separates statements, so it may be left off before ``}``
        and at the end of input."""
        if not self.accept(";") and not (self.at("}") or self.tok.kind == "eof"):
            self.error(f"unexpected {self.tok.text or 'end of input'!r}", {";"})

    def stmt(self) -> A.Stmt:
        t = self.tok
        if self.accept("skip"):
            self.end_stmt()
            return A.Skip()
        if self.accept("while"):
            self.expect("(")
            c = self.expr()
            self.expect(")")
            return A.While(c, self.block())
        if self.accept("if"):
            self.expect("(")
            c = self.expr()
            self.expect(")")
            th = self.block()
            el = self.block() if self.accept("else") else A.Skip()
            return A.If(c, th, el)
        if t.text in ("assert", "assume") and t.kind == "ident":
            self.pos += 1
            self.expect("(")
            c = self.expr()
            self.expect(")")
            self.end_stmt()
            return A.Assert(c) if t.text == "assert" else A.Assume(c)
        if self.at("{"):
            return self.block()
        if self.starts_type():
            ty = self.type_()
            name = self.name_or_meta()
            rhs = None
            if self.accept("="):
                rhs = self.expr()
            self.end_stmt()
            return A.Decl(name, ty, rhs)
        if t.kind in ("ident", "meta"):
            name = self.name_or_meta()
            if self.accept("["):
                idx = self.expr()
                self.expect("]")
                self.expect("=")
                val = self.expr()
                self.end_stmt()
                arr = name if isinstance(name, A.Meta) else A.Var(name)
                return A.Assign(name, A.Store(arr, idx, val))
            self.expect("=")
            rhs = self.expr()
            self.end_stmt()
            return A.Assign(name, rhs)
        self.error(f"unexpected {t.text or 'end of input'!r}",
                   {"skip", "while", "if", "assert", "assume", "{", "identifier", "type"})

    # -- expressions, lowest precedence first

    def expr(self) -> A.Expr:
        return self.or_()

    def or_(self):
        e = self.and_()
        while self.accept("||"):
            e = A.Or(e, self.and_())
        return e

    def and_(self):
        e = self.eq()
        while self.accept("&&"):
            e = A.And(e, self.eq())
        return e

    def eq(self):
        e = self.rel()
        while self.at("==", "!="):
            op = self.tok.text
            self.pos += 1
            r = self.rel()
            e = A.Eq(e, r) if op == "==" else A.Not(A.Eq(e, r))
        return e

    def rel(self):
        e = self.add()
        while self.at("<=", "<", ">", ">="):
            op = self.tok.text
            self.pos += 1
            r = self.add()
            e = {"<=": lambda: A.Leq(e, r), "<": lambda: A.lt(e, r),
                 ">": lambda: A.Not(A.Leq(e, r)), ">=": lambda: A.Leq(r, e)}[op]()
        return e

    def add(self):
        e = self.mul()
        while self.at("+", "-"):
            op = self.tok.text
            self.pos += 1
            r = self.mul()
            e = A.Add(e, r) if op == "+" else A.sub(e, r)
        return e

    def mul(self):
        e = self.unary()
        while self.at("*", "/"):
            op = self.tok.text
            self.pos += 1
            r = self.unary()
            e = A.Mul(e, r) if op == "*" else A.Div(e, r)
        return e

    def unary(self):
        if self.accept("!"):
            return A.Not(self.unary())
        if self.accept("-"):
            if self.tok.kind == "num":
                v = int(self.tok.text)
                self.pos += 1
                return self.postfix(A.IntLit(-v))
            return A.Mul(A.IntLit(-1), self.unary())
        return self.postfix(self.atom())

    def postfix(self, e):
        while self.accept("["):
            i = self.expr()
            self.expect("]")
            e = A.Select(e, i)
        return e

    def args(self, n: int) -> list:
        self.expect("(")
        out = [self.expr()]
        for _ in range(n - 1):
            self.expect(",")
            out.append(self.expr())
        self.expect(")")
        return out

    def lambda_(self):
        if self.tok.kind == "at":
            self.pos += 1
            return A.PredRef()
        t = self.tok
        if not (t.kind == "bskw" and t.text == "\\lambda"):
            self.error(f"unexpected {t.text or 'end of input'!r}", {"\\lambda"})
        self.pos += 1
        self.expect("(")
        v = self.ident()
        self.expect(",")
        i = self.ident()
        self.expect(")")
        self.expect(".")
        return A.Lambda(v, i, self.expr())

    def agg_key(self) -> str:
        parts = [self.ident()]
        while self.accept("-"):
            parts.append(self.ident())
        return "-".join(parts)

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.pos += 1
            return A.IntLit(int(t.text))
        if t.kind == "meta":
            self.pos += 1
            return A.Meta(t.text[1:])
        if t.kind == "at":
            self.pos += 1
            v, i = self.args(2)
            return A.PredApp(v, i)
        if self.accept("true"):
            return A.BoolLit(True)
        if self.accept("false"):
            return A.BoolLit(False)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("nondet"):
            # the declared type is filled in by the type checker
            return A.Nondet(A.INT)
        if self.accept("const"):
            (f,) = self.args(1)
            return A.ConstArray(f)
        if self.accept("select"):
            a, i = self.args(2)
            return A.Select(a, i)
        if self.accept("store"):
            a, i, v = self.args(3)
            return A.Store(a, i, v)
        if t.kind == "bskw":
            return self.backslash_form()
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.pos += 1
            return A.Var(t.text)
        self.error(f"unexpected {t.text or 'end of input'!r}", {"expression"})

    def backslash_form(self):
        t = self.tok
        word = t.text[1:]
        self.pos += 1
        if word in A.QUANT_NAMES or word in A.AGGREGATE_NAMES:
            self.expect("(")
            a = self.expr()
            self.expect(",")
            lo = self.expr()
            self.expect(",")
            hi = self.expr()
            pred = None
            if word in A.QUANT_NAMES or word == "numof" or self.at(","):
                self.expect(",")
                pred = self.lambda_()
            self.expect(")")
            if word in A.QUANT_NAMES:
                return A.Quant(word, a, lo, hi, pred)
            return A.Aggregate(word, a, lo, hi, pred)
        if word == "exists_vars":
            bound = []
            self.expect("(")
            while True:
                ty = self.type_()
                bound.append((self.ident(), ty))
                if not self.accept(","):
                    break
            self.expect(")")
            self.expect(".")
            return A.ExistsVars(tuple(bound), self.unary())
        if word in ("unit", "combine", "uncombine", "lift", "finalize", "fold"):
            self.expect("{")
            key = self.agg_key()
            pred = None
            if self.accept(","):
                pred = self.lambda_()
            self.expect("}")
            arity = {"unit": 0, "combine": 2, "uncombine": 2, "lift": 2, "finalize": 1, "fold": 3}[word]
            args = tuple(self.args(arity)) if arity else ()
            return A.MonoidOp(word, key, args, pred)
        raise ParseError(f"unknown form {t.text!r}", t.line, t.col)


def parse_stmt(text: str, *, fresh_names: bool = False, metas: bool = False) -> A.Stmt:
    p = Parser(text, fresh_names=fresh_names, metas=metas)
    return p.program_stmt()


def parse_expr(text: str, *, fresh_names: bool = False, metas: bool = False) -> A.Expr:
    p = Parser(text, fresh_names=fresh_names, metas=metas)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}", {"end of input"})
    return e


def parse(text: str, *, fresh_names: bool = False) -> A.Program:
    """Parse a whole program; ids are assigned pre-order from 0.

    Nondet nodes get their type from the enclosing declaration or the
    assigned variable, which is known once declarations are collected.
    """
    body = parse_stmt(text, fresh_names=fresh_names)
    prog = A.make_program(body)
    return A.Program(prog.vocab, _type_nondets(prog.body, prog.vocab))


def _type_nondets(s, vocab):
    from dataclasses import replace

    def fix(e, ty):
        if isinstance(e, A.Nondet):
            return A.Nondet(ty) if ty is not None else e
        return e

    match s:
        case A.Decl(n, ty, rhs) if isinstance(rhs, A.Nondet):
            return replace(s, rhs=A.Nondet(ty))
        case A.Assign(n, rhs) if isinstance(rhs, A.Nondet):
            return replace(s, rhs=fix(rhs, vocab.get(n)))
        case A.Seq(stmts):
            return replace(s, stmts=tuple(_type_nondets(c, vocab) for c in stmts))
        case A.While(c, b):
            return replace(s, body=_type_nondets(b, vocab))
        case A.If(c, t, e):
            return replace(s, then=_type_nondets(t, vocab), els=_type_nondets(e, vocab))
    return s
