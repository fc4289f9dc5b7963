from . import ast
from .normalize import is_normal, normalize
from .parser import ParseError, parse, parse_expr, parse_stmt
from .pretty import expr_str, pretty
from .typecheck import IllTyped, TypeCheckError, TypedProgram, check, typecheck


def load(text: str, *, fresh_names: bool = False) -> ast.Program:
    """Parse and type check, returning the elaborated program."""
    return check(parse(text, fresh_names=fresh_names))


__all__ = [
    "ast", "parse", "parse_expr", "parse_stmt", "ParseError", "pretty", "expr_str",
    "typecheck", "check", "TypeCheckError", "TypedProgram", "IllTyped",
    "normalize", "is_normal", "load",
]
