import random

import pytest
from hypothesis import given, settings, strategies as st

from instrumenta import lang, monoids as M

ints = st.integers(-20, 20)
ext_neg = st.one_of(st.just(M.NEG_INF), ints)
ext_pos = st.one_of(st.just(M.POS_INF), ints)
pairs = st.builds(M.Pair, st.integers(-20, 20).filter(lambda p: p != 0), st.integers(0, 5))

CARRIERS = {
    "sum": ints, "product": ints, "max": ext_neg, "min": ext_pos,
    "and": st.booleans(), "or": st.booleans(), "prod-pair": pairs,
}
MONOIDS = {m.name: m for m in (M.SUM, M.PRODUCT, M.MAX, M.MIN, M.AND, M.OR, M.PROD_PAIR)}
LAW_SAMPLES = settings(max_examples=10_000)


@pytest.mark.parametrize("name", sorted(MONOIDS))
def test_monoid_laws(name):
    m, elems = MONOIDS[name], CARRIERS[name]

    @LAW_SAMPLES
    @given(elems, elems, elems)
    def laws(x, y, z):
        c = m.combine
        assert c(c(x, y), z) == c(x, c(y, z))
        assert c(m.identity, x) == x == c(x, m.identity)
        if m.commutative:
            assert c(x, y) == c(y, x)
        if m.inverse is not None:
            assert m.inverse(c(x, y), y) == x

    laws()


def test_combine_examples():
    assert M.combine(M.MAX, M.NEG_INF, 5) == 5
    assert M.combine(M.PROD_PAIR, M.Pair(2, 0), M.Pair(3, 1)) == M.Pair(6, 1)
    assert M.combine(M.SUM, 4, 3) == 7


def test_inverse_examples():
    assert M.inverse_combine(M.SUM, 7, 3) == 4
    numof = M.registry_lookup("numof").monoid
    assert M.inverse_combine(numof, 5, 1) == 4
    assert M.inverse_combine(M.PROD_PAIR, M.Pair(6, 1), M.Pair(3, 1)) == M.Pair(2, 0)


def test_inverse_needs_a_cancellative_monoid():
    with pytest.raises(M.NotCancellative):
        M.inverse_combine(M.MAX, 3, 2)


def test_pair_inverse_is_partial():
    with pytest.raises(M.PartialityError):
        M.inverse_combine(M.PROD_PAIR, M.Pair(6, 0), M.Pair(3, 1))
    with pytest.raises(M.PartialityError):
        M.inverse_combine(M.PROD_PAIR, M.Pair(7, 0), M.Pair(3, 0))


def _pred(text):
    return lang.parse_expr(f"\\numof(a, 0, 0, \\lambda(x, i).({text}))").pred


def _pred_fn(text):
    lam = _pred(text)
    from instrumenta.semantics import Compiler
    return Compiler().pred_fn(lam, {})


def test_lift_examples():
    numof = M.registry_lookup("numof", _pred("x == i"))
    assert M.lift_singleton(numof, 5, 5, _pred_fn("x == i")) == 1
    assert M.lift_singleton(numof, 5, 4, _pred_fn("x == i")) == 0
    assert M.lift_singleton(M.registry_lookup("product-cancellative"), 0) == M.Pair(1, 1)
    assert M.lift_singleton(M.registry_lookup("sum"), 9) == 9


def test_finalize_examples():
    ex = M.registry_lookup("exists-cancellative")
    assert M.finalize(ex, 0) is False
    assert M.finalize(ex, 3) is True
    prod = M.registry_lookup("product-cancellative")
    assert M.finalize(prod, M.Pair(6, 1)) == 0
    assert M.finalize(prod, M.Pair(6, 0)) == 6
    assert M.finalize(M.registry_lookup("sum"), 6) == 6


def test_lookup_examples():
    mx = M.registry_lookup("max")
    assert (mx.monoid.carrier, mx.monoid.identity, mx.indexed) == (lang.ast.NEG_INF_INT, M.NEG_INF, False)
    assert M.lift_singleton(mx, 4) == 4
    lam = _pred("x == i")
    fa = M.registry_lookup("forall", lam)
    assert (fa.monoid is M.AND, fa.indexed, fa.pred) == (True, True, lam)
    ex = M.registry_lookup("exists-cancellative", lam)
    assert ex.monoid.identity == 0 and ex.cancellative and ex.pred == lam


def test_unknown_aggregator():
    with pytest.raises(M.UnknownAggregator):
        M.registry_lookup("median")


def test_every_source_aggregate_is_in_the_registry():
    sources = {s.source for s in M.REGISTRY.values()}
    assert sources == {"sum", "min", "max", "product", "numof", "forall", "exists"}


@pytest.mark.parametrize("key", sorted(M.REGISTRY))
def test_fold_is_a_homomorphism(key):
    spec = M.registry_lookup(key, _pred("x > i"))
    pf = _pred_fn("x > i") if spec.predicated else None
    rng = random.Random(key)
    for _ in range(2000):
        items = [(rng.randint(-4, 4), k) for k in range(rng.randint(0, 10))]
        cut = rng.randint(0, len(items))
        whole = M.fold(spec, items, pf)
        parts = spec.monoid.combine(M.fold(spec, items[:cut], pf), M.fold(spec, items[cut:], pf))
        assert whole == parts
