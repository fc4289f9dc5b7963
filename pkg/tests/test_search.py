import io
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import load_sample
from instrumenta import lang
from instrumenta.instrumentation import (BOT, builtin_operator, instrument, instrumentation_space,
                                         operator_for_program)
from instrumenta.oracle import BoundedDomain, BoundedOracle, Correct, Unknown, check_bounded
from instrumenta.search import (CandidateSet, EmptyCandidateSet, Inconclusive, OracleFailure,
                                Refuted, SearchConfig, Verified, escalated, log_writer, pick,
                                refine, search)
from instrumenta.semantics import AssertFailed, replay
from progen import ProgramGen


@pytest.fixture
def space(triangular):
    return instrumentation_space(triangular, builtin_operator("square"))


def points(space):
    """The four rewritable points in program order: A, B, C, D."""
    return sorted(space)


TRIANGULAR_ORACLE = BoundedOracle(BoundedDomain(default=(1, 8), budget=10_000))


# ---------------------------------------------------------------- candidates

def test_blocking_c_unrewritten_halves_the_space(space):
    cand = CandidateSet(space)
    assert cand.count() == 16
    c = points(space)[2]
    refine(cand, {p: BOT for p in space}, {c})
    assert cand.count() == 8


def test_two_disjoint_blocks(space):
    cand = CandidateSet(space)
    c, d = points(space)[2:]
    cand.block({c: BOT})
    cand.block({d: BOT})
    assert cand.count() == 16 - 8 - 8 + 4


def test_blocking_a_whole_selection_removes_one(space):
    cand = CandidateSet(space)
    sel = pick(cand)
    refine(cand, sel, set())
    assert cand.count() == 15 and sel not in cand


def test_counting_agrees_with_enumeration(space):
    cand = CandidateSet(space)
    rng = random.Random(3)
    for _ in range(4):
        cand.block({p: rng.choice(space[p]) for p in rng.sample(sorted(space), 2)})
        assert cand.count() == len(list(cand))


def test_all_first_starts_with_the_maximal_selection(space):
    a, b, c, d = points(space)
    assert pick(CandidateSet(space)) == {a: "R1", b: "R1", c: "R2", d: "R4"}


def test_next_pick_is_one_change_away(space):
    cand = CandidateSet(space)
    first = pick(cand)
    refine(cand, first, set())
    second = pick(cand)
    assert sum(first[p] != second[p] for p in space) == 1


def test_lex_walks_in_order(space):
    cand = CandidateSet(space)
    seen = []
    while not cand.is_empty():
        sel = pick(cand, "lex")
        seen.append(tuple(sel[p] or "~" for p in points(space)))
        refine(cand, sel, set())
    assert len(seen) == 16 and seen == sorted(seen)


def test_singleton_space():
    cand = CandidateSet({})
    assert pick(cand) == {}
    refine(cand, {}, set())
    with pytest.raises(EmptyCandidateSet):
        pick(cand)


def test_unknown_strategy(space):
    with pytest.raises(ValueError):
        pick(CandidateSet(space), "random")


# -------------------------------------------------------------------- search

def test_triangular_is_verified_with_the_expected_rules(triangular, space):
    res = search(triangular, builtin_operator("square"), TRIANGULAR_ORACLE)
    assert isinstance(res, Verified)
    c, d = points(space)[2:]
    assert (res.selection[c], res.selection[d]) == ("R2", "R4")
    assert res.iterations <= 16
    assert isinstance(check_bounded(res.program.program, BoundedDomain(default=(1, 8))), Correct)


def test_mutated_postcondition_is_refuted():
    p = load_sample("triangular_mutated.cw")
    res = search(p, builtin_operator("square"), TRIANGULAR_ORACLE)
    assert isinstance(res, Refuted) and res.iterations <= 16
    assert all(set(s.vars) <= set(p.vocab) for s in res.trace)
    again = replay(p, res.trace)
    assert isinstance(again, AssertFailed) and again.point == res.point


def test_assert_false_is_refuted_at_once():
    res = search(lang.load("assert(false);"), builtin_operator("sum"), BoundedOracle())
    assert isinstance(res, Refuted) and len(res.trace) == 1


def test_random_write_order_is_inconclusive_under_sampling():
    p = load_sample("sum_random_order.cw")
    oracle = BoundedOracle(BoundedDomain(default=(-3, 3), exhaustive=False))
    res = search(p, operator_for_program("sum", p), oracle)
    assert isinstance(res, Inconclusive)


def test_unknown_selections_are_retried_with_more_budget(triangular):
    budgets = []

    def undecided(prog, budget):
        budgets.append(budget)
        return Unknown("no idea")

    res = search(triangular, builtin_operator("square"), undecided, SearchConfig(max_budget=4))
    assert isinstance(res, Inconclusive)
    assert sorted(set(budgets)) == [1, 2, 4]
    assert budgets.count(1) == budgets.count(2) == budgets.count(4) == 16


def test_escalation_composes_a_second_copy(triangular):
    ghosts = []

    def undecided(prog, budget):
        ghosts.append(sum(1 for n in prog.vocab if n.startswith("x_sq")))
        return Unknown("no idea")

    search(triangular, builtin_operator("square"), undecided, SearchConfig(max_budget=1, max_operators=2))
    assert set(ghosts) == {1, 2}


def test_escalated_rule_ids_are_distinct():
    op = escalated(builtin_operator("square"), 3)
    ids = [r.rule_id for r in op.rules]
    assert len(ids) == 12 == len(set(ids))
    assert len(op.ghosts) == 6


def test_oracle_exceptions_carry_the_selection(triangular):
    def broken(prog, budget):
        raise RuntimeError("boom")

    with pytest.raises(OracleFailure) as ex:
        search(triangular, builtin_operator("square"), broken)
    assert ex.value.selection


def test_log_has_one_line_per_iteration(triangular):
    buf = io.StringIO()
    res = search(triangular, builtin_operator("square"), TRIANGULAR_ORACLE,
                 SearchConfig(log=log_writer(buf)))
    lines = [json.loads(l) for l in buf.getvalue().splitlines()]
    assert len(lines) == res.iterations
    assert set(lines[0]) == {"iteration", "selection", "verdict", "candidatesRemaining"}
    assert lines[-1]["verdict"] == "correct"


def test_parallel_workers_reach_the_same_verdict(triangular):
    res = search(triangular, builtin_operator("square"), TRIANGULAR_ORACLE, SearchConfig(jobs=4))
    assert isinstance(res, Verified)


def test_deadline(triangular):
    res = search(triangular, builtin_operator("square"), lambda p, b: Unknown("slow"),
                 SearchConfig(deadline=0))
    assert isinstance(res, Inconclusive) and res.reason == "deadline reached"


# ---------------------------------------------------------------- properties

EXACT = BoundedOracle(BoundedDomain(default=(-3, 3), budget=20_000, max_paths=20_000))


@settings(max_examples=60)
@given(st.sampled_from(["sum", "max", "numof", "forall"]), st.randoms(use_true_random=False))
def test_search_is_sound_and_complete_on_small_programs(name, rng):
    text = ProgramGen(rng, aggs=(name,), nested=False,
                      bounded=True, max_len=2, stmts=3).program()
    p = lang.normalize(lang.load(text))
    op = operator_for_program(name, p)
    space = instrumentation_space(p, op)
    res = search(p, op, EXACT)
    if isinstance(res, Verified):
        assert isinstance(check_bounded(res.program.program, EXACT.domain), Correct)
    elif isinstance(res, Refuted):
        assert isinstance(replay(p, res.trace), AssertFailed)
        # then no selection can be correct
        assert not isinstance(check_bounded(p, EXACT.domain), Correct)
    elif CandidateSet(space).count() <= 64:
        for sel in CandidateSet(space):
            v = check_bounded(instrument(p, op, sel).program, EXACT.domain)
            assert not isinstance(v, Correct)
