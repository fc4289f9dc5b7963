"""Monoids, homomorphism generators and the aggregator registry.

Values on the integer-like carriers are plain Python ints plus the two
sentinels ``NEG_INF`` and ``POS_INF``; the product-tracking monoid uses
``Pair``.  Booleans are Python bools.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import reduce, total_ordering
from typing import Any, Callable

from .lang import ast as A


class NotCancellative(Exception):
    pass


class PartialityError(ArithmeticError):
    pass


class UnknownAggregator(KeyError):
    pass


@total_ordering
class _Inf:
    __slots__ = ("sign",)

    def __init__(self, sign: int):
        self.sign = sign

    def __eq__(self, other):
        return isinstance(other, _Inf) and other.sign == self.sign

    def __hash__(self):
        return hash(("inf", self.sign))

    def __lt__(self, other):
        if isinstance(other, _Inf):
            return self.sign < other.sign
        return self.sign < 0

    def __repr__(self):
        return "-inf" if self.sign < 0 else "+inf"


NEG_INF = _Inf(-1)
POS_INF = _Inf(1)


def is_inf(v) -> bool:
    return isinstance(v, _Inf)


@dataclass(frozen=True)
class Pair:
    """Element (p, c) of the product-tracking monoid: p != 0 is the
    product of the nonzero factors, c counts the zero factors."""
    p: int
    c: int

    def __repr__(self):
        return f"({self.p}, {self.c})"


@dataclass(frozen=True)
class MonoidSpec:
    name: str
    carrier: A.Type
    combine: Callable[[Any, Any], Any]
    identity: Any
    inverse: Callable[[Any, Any], Any] | None = None
    commutative: bool = True


def _max(a, b):
    return a if a >= b else b


def _min(a, b):
    return a if a <= b else b


def _pair_combine(x: Pair, y: Pair) -> Pair:
    return Pair(x.p * y.p, x.c + y.c)


def _pair_inverse(xy: Pair, y: Pair) -> Pair:
    if xy.c < y.c:
        raise PartialityError(f"zero count underflow: {xy} / {y}")
    q, r = divmod(xy.p, y.p)
    if r:
        raise PartialityError(f"{y.p} does not divide {xy.p}")
    return Pair(q, xy.c - y.c)


SUM = MonoidSpec("sum", A.INT, lambda a, b: a + b, 0, lambda a, b: a - b)
MAX = MonoidSpec("max", A.NEG_INF_INT, _max, NEG_INF)
MIN = MonoidSpec("min", A.POS_INF_INT, _min, POS_INF)
PRODUCT = MonoidSpec("product", A.INT, lambda a, b: a * b, 1)
AND = MonoidSpec("and", A.BOOL, lambda a, b: a and b, True)
OR = MonoidSpec("or", A.BOOL, lambda a, b: a or b, False)
PROD_PAIR = MonoidSpec("prod-pair", A.PAIR, _pair_combine, Pair(1, 0), _pair_inverse)


def combine(m: MonoidSpec, a, b):
    return m.combine(a, b)


def inverse_combine(m: MonoidSpec, xy, y):
    """The x with x . y == xy."""
    if m.inverse is None:
        raise NotCancellative(m.name)
    return m.inverse(xy, y)


PredFn = Callable[[Any, int], bool]


@dataclass(frozen=True)
class AggregatorSpec:
    key: str
    source: str  # surface aggregate or quantifier this realises
    monoid: MonoidSpec
    singleton: Callable[[Any, int, PredFn | None], Any]
    finalizer: Callable[[Any], Any] | None = None
    result_type: A.Type = A.INT
    elem_type: A.Type | None = A.INT  # None: any element type
    indexed: bool = False
    predicated: bool = False
    pred: A.Lambda | None = None

    @property
    def cancellative(self) -> bool:
        return self.monoid.inverse is not None


def lift_singleton(agg: AggregatorSpec, x, i: int | None = None, pred_fn: PredFn | None = None):
    return agg.singleton(x, i, pred_fn)


def finalize(agg: AggregatorSpec, v):
    return v if agg.finalizer is None else agg.finalizer(v)


def fold(agg: AggregatorSpec, items, pred_fn: PredFn | None = None):
    """Fold h over (value, index) pairs without finalizing."""
    m = agg.monoid
    return reduce(m.combine, (agg.singleton(x, i, pred_fn) for x, i in items), m.identity)


def _ident(x, i, p):
    return x


def _count(x, i, p):
    return 1 if p(x, i) else 0


def _holds(x, i, p):
    return bool(p(x, i))


def _prod_single(x, i, p):
    return Pair(x, 0) if x != 0 else Pair(1, 1)


def _prod_final(v: Pair):
    return v.p if v.c == 0 else 0


REGISTRY: dict[str, AggregatorSpec] = {
    "sum": AggregatorSpec("sum", "sum", SUM, _ident),
    "max": AggregatorSpec("max", "max", MAX, _ident),
    "min": AggregatorSpec("min", "min", MIN, _ident),
    "product": AggregatorSpec("product", "product", PRODUCT, _ident),
    "numof": AggregatorSpec("numof", "numof", SUM, _count, elem_type=None,
                            indexed=True, predicated=True),
    "forall": AggregatorSpec("forall", "forall", AND, _holds, result_type=A.BOOL,
                             elem_type=None, indexed=True, predicated=True),
    "exists": AggregatorSpec("exists", "exists", OR, _holds, result_type=A.BOOL,
                             elem_type=None, indexed=True, predicated=True),
    "exists-cancellative": AggregatorSpec(
        "exists-cancellative", "exists", SUM, _count, finalizer=lambda c: c > 0,
        result_type=A.BOOL, elem_type=None, indexed=True, predicated=True),
    "product-cancellative": AggregatorSpec(
        "product-cancellative", "product", PROD_PAIR, _prod_single, finalizer=_prod_final),
}


def registry_lookup(name: str, pred: A.Lambda | None = None) -> AggregatorSpec:
    try:
        spec = REGISTRY[name]
    except KeyError:
        raise UnknownAggregator(name) from None
    if spec.predicated and pred is not None:
        spec = replace(spec, pred=pred)
    return spec


def carrier_of(name: str) -> A.Type:
    return registry_lookup(name).monoid.carrier
