import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import ROOT, SAMPLES, load_sample
from harness import OPERATORS, compare, random_case, run_pair
from instrumenta import lang
from instrumenta.instrumentation import (BOT, EMPTY, GhostNameClash, InvalidSelection,
                                         build_aggregation_operator, builtin_operator,
                                         collapse_split_temporaries, compose, dump_operator,
                                         full_selection, instrument, instrumentation_space,
                                         load_operator, match_rule, operator_for_program,
                                         rewrite_statement, space_size)
from instrumenta.instrumentation.conditions import (check_operator_conditions, delete_statement,
                                                    standard_mutants)
from instrumenta.lang import ast as A
from instrumenta.lang.pretty import stmt_lines
from instrumenta.monoids import NEG_INF, NotCancellative
from instrumenta.semantics import Scripted, Terminated, eval_expr, run, structurally_equivalent
from progen import ProgramGen

EQ = A.Lambda("x", "i", A.Eq(A.Var("x"), A.Var("i")))


def stmt_of(p, text):
    for s in A.walk(p.body):
        if isinstance(s, (A.Assign, A.Decl)) and s.rhs is not None \
                and stmt_lines(s)[0].strip() == text:
            return s
    raise LookupError(text)


def text_of(s) -> str:
    return "\n".join(l.strip() for l in stmt_lines(s))


# --------------------------------------------------------------- matching

def test_square_rule_binds_the_squared_variable(triangular):
    r4 = builtin_operator("square").rule("R4")
    m = match_rule(r4, stmt_of(triangular, "Int NN = N * N;"), triangular.vocab)
    assert m.subst == {"y": A.Var("NN"), "x": A.Var("N")}


def test_sum_of_two_variables_is_not_a_square():
    p = lang.load("Int x = 0; Int y = 1; Int z = 2; x = y + z;")
    r4 = builtin_operator("square").rule("R4")
    assert match_rule(r4, stmt_of(p, "x = y + z;"), p.vocab) is None


def test_store_into_the_same_array_flags_the_lhs(forall_index):
    store = builtin_operator("forall", EQ).rule("store")
    m = match_rule(store, stmt_of(forall_index, "a = store(a, i, i);"), forall_index.vocab)
    assert m is not None and m.lhs_occurs


# -------------------------------------------------------------- rewriting

def test_increment_is_split_through_a_fresh_temporary(triangular):
    r2 = builtin_operator("square").rule("R2")
    env = dict(triangular.vocab, x_sq=A.INT, x_shad=A.INT)
    out = rewrite_statement(r2, stmt_of(triangular, "i = i + 1;"), env,
                            A.FreshNamer(A.all_names(triangular)))
    assert text_of(out).splitlines() == [
        "Int i$1;", "assert(i == x_shad);", "x_sq = x_sq + 2 * i + 1;",
        "i$1 = i + 1;", "x_shad = i$1;", "i = i$1;"]


def test_store_rewrite_assigns_the_fresh_array_before_tracking(forall_index):
    op = builtin_operator("forall", EQ)
    env = dict(forall_index.vocab, **op.ghost_env())
    out = text_of(rewrite_statement(op.rule("store"), stmt_of(forall_index, "a = store(a, i, i);"), env,
                                    A.FreshNamer(A.all_names(forall_index))))
    assert "a$1 = store(a, i, i);" in out
    assert out.index("a$1 = store(a, i, i);") < out.index("qu_ar = a$1;")
    assert out.endswith("a = a$1;")


def test_bot_leaves_the_statement_alone(triangular):
    op = builtin_operator("square")
    ip = instrument(triangular, op, {})
    assert ip.selection == {p: BOT for p in instrumentation_space(triangular, op)}
    body = ip.program.body.stmts
    assert [text_of(s) for s in body[:2]] == ["Int x_sq = 0;", "Int x_shad = 0;"]
    assert A.Seq(body[2:]) == triangular.body or body[2:] == triangular.body.stmts


# ----------------------------------------------------------------- spaces

def test_triangular_space_has_sixteen_selections(triangular):
    space = instrumentation_space(triangular, builtin_operator("square"))
    assert sorted(map(tuple, space.values())) == [("R1", None)] * 2 + [("R2", None), ("R4", None)]
    assert space_size(space) == 16


def test_no_match_gives_the_singleton_space():
    p = lang.load("Bool b = true; assert(b);")
    space = instrumentation_space(p, builtin_operator("square"))
    assert space == {} and space_size(space) == 1


def test_battery_has_two_reads_and_one_maximum():
    p = load_sample("battery.cw")
    space = instrumentation_space(p, builtin_operator("max"))
    stmts = {s.pid: s for s in A.walk(p.body)}
    kinds = sorted(type(stmts[q].rhs).__name__ for q in space)
    assert kinds == ["Aggregate", "Select", "Select"]


# ------------------------------------------------------ golden fixtures

def test_universal_quantifier_fixture(forall_index):
    op = operator_for_program("forall", forall_index)
    ip = instrument(forall_index, op, full_selection(instrumentation_space(forall_index, op)))
    want = lang.load((SAMPLES / "forall_index_expected.cw").read_text(), fresh_names=True)
    assert structurally_equivalent(ip.program, want)


def test_square_fixture_modulo_the_split_temporary(triangular):
    op = builtin_operator("square")
    space = instrumentation_space(triangular, op)
    sel = {p: ("R2" if "R2" in cs else "R4" if "R4" in cs else BOT) for p, cs in space.items()}
    ip = instrument(triangular, op, sel)
    want = lang.load((SAMPLES / "triangular_expected.cw").read_text(), fresh_names=True)
    assert not structurally_equivalent(ip.program, want)
    assert structurally_equivalent(collapse_split_temporaries(ip.program), want)


# ----------------------------------------------------------- application

def test_unknown_rule_is_an_invalid_selection(triangular):
    op = builtin_operator("square")
    p = next(iter(instrumentation_space(triangular, op)))
    with pytest.raises(InvalidSelection):
        instrument(triangular, op, {p: "R4"})
    with pytest.raises(InvalidSelection):
        instrument(triangular, op, {999: "R1"})


def test_ghost_clash_without_freshening():
    p = lang.load("Int x_sq = 3; Int y = x_sq * x_sq;")
    with pytest.raises(GhostNameClash):
        instrument(p, builtin_operator("square"), {}, allow_freshening=False)
    ip = instrument(p, builtin_operator("square"), {})
    assert "x_sq" not in ip.operator.ghost_names


def test_added_assertions_are_new_points(triangular):
    op = builtin_operator("square")
    ip = instrument(triangular, op, full_selection(instrumentation_space(triangular, op)))
    originals = {ip.point_map[s.pid] for s in A.walk(triangular.body) if isinstance(s, A.Assert)}
    assert ip.added_asserts and not (ip.added_asserts & originals)
    assert len(set(ip.point_map.values())) == len(ip.point_map)


def test_sum_update_inside_the_tracked_interval():
    p = lang.load("Array Int a = const(0); a = store(a, 0, 1); a = store(a, 1, 2);"
                  "a = store(a, 2, 3); Int x = 9; a = store(a, 1, x); Int s = \\sum(a, 0, 3);")
    op = builtin_operator("sum")
    ip = instrument(p, op, full_selection(instrumentation_space(p, op)))
    res = run(ip.program)
    assert isinstance(res, Terminated)
    assert (res.final["ag_lo"], res.final["ag_hi"], res.final["ag_val"], res.final["s"]) == (0, 3, 13, 13)


def test_non_cancellative_sum_resets_instead():
    p = lang.load("Array Int a = const(0); a = store(a, 0, 1); a = store(a, 1, 2);"
                  "a = store(a, 2, 3); Int x = 9; a = store(a, 1, x);")
    op = builtin_operator("sum-nc")
    res = run(instrument(p, op, full_selection(instrumentation_space(p, op))).program)
    assert (res.final["ag_lo"], res.final["ag_hi"], res.final["ag_val"]) == (1, 2, 9)


def test_cancellative_exists_finalizes_the_count():
    op = builtin_operator("exists", EQ)
    assert op.rule("aggregate").template is not None
    text = text_of(op.rule("aggregate").template)
    assert "$r = \\finalize{exists-cancellative}(ag_val);" in text


def test_max_cannot_be_cancellative():
    with pytest.raises(NotCancellative):
        build_aggregation_operator("max", True)


def test_max_invariant_holds_initially():
    op = builtin_operator("max")
    env = {}
    for g in op.ghosts:
        env[g.name] = eval_expr(g.init, env)
    assert env["ag_val"] is NEG_INF
    assert eval_expr(op.invariant, env)


def test_square_invariant_and_sum_inits():
    assert text_of(A.Assert(builtin_operator("square").invariant)) == "assert(x_sq == x_shad * x_shad);"
    inits = {g.name: eval_expr(g.init, {}) for g in builtin_operator("sum").ghosts}
    assert inits["ag_lo"] == inits["ag_hi"] == inits["ag_val"] == 0
    assert inits["ag_ar"].default == 0 and not inits["ag_ar"].entries


# ----------------------------------------------------------- composition

def test_max_with_sum_has_eight_ghosts():
    mx, sm = builtin_operator("max"), builtin_operator("sum")
    both = compose(mx, sm)
    assert len(both.ghosts) == 8
    assert both.invariant == A.And(mx.invariant, both.invariant.r)
    assert len(both.rules) == len(mx.rules) + len(sm.rules)


def test_sum_with_itself_renames_the_copy():
    sm = builtin_operator("sum")
    both = compose(sm, sm)
    first, second = both.ghost_names[:4], both.ghost_names[4:]
    assert not set(first) & set(second)
    assert len({r.rule_id for r in both.rules}) == 6


def test_empty_operator_is_neutral():
    sq = builtin_operator("square")
    assert compose(sq, EMPTY) is sq and compose(EMPTY, sq) is sq


# ------------------------------------------------------------ operator files

def test_shipped_square_file_matches_the_builtin(triangular):
    op = load_operator(ROOT / "ops" / "square.op.toml")
    builtin = builtin_operator("square")
    assert op.invariant == builtin.invariant
    assert [(r.rule_id, r.template) for r in op.rules] == \
           [(r.rule_id, r.template) for r in builtin.rules]


@pytest.mark.parametrize("name", ["square", "forall", "exists", "max", "min", "sum", "product",
                                  "numof", "exists-nc", "product-nc"])
def test_dump_then_load_gives_the_same_operator(name, tmp_path):
    op = builtin_operator(name, EQ)
    path = tmp_path / f"{name}.op.toml"
    path.write_text(dump_operator(op))
    again = load_operator(path)
    assert again.invariant == op.invariant
    assert [g.init for g in again.ghosts] == [g.init for g in op.ghosts]
    assert [(r.rule_id, r.rhs, r.template) for r in again.rules] == \
           [(r.rule_id, r.rhs, r.template) for r in op.rules]


# ------------------------------------------------------------- conditions

def test_square_passes_every_condition():
    report = check_operator_conditions(builtin_operator("square"), samples=10_000)
    assert report.passed
    assert {r.condition for r in report.results} == {"init", "terminate", "frame", "preserve", "agree"}


def test_square_without_shadow_update_is_caught():
    bad = delete_statement(builtin_operator("square"), "R2", "x_shad = $y;")
    fails = check_operator_conditions(bad, samples=2000).failures()
    assert fails and fails[0].counterexample


def test_there_are_eight_mutants():
    assert len(standard_mutants()) == 8


# -------------------------------------------------------------- properties

@settings(max_examples=400)
@given(st.sampled_from(OPERATORS), st.randoms(use_true_random=False), st.integers(0, 10_000))
def test_instrumentation_preserves_runs(name, rng, seed):
    ip = random_case(rng, name)
    assert compare(ip, run_pair(ip, seed)) == []


@settings(max_examples=150)
@given(st.randoms(use_true_random=False), st.integers(0, 10_000))
def test_composition_keeps_both_invariants(rng, seed):
    p = lang.normalize(lang.load(ProgramGen(rng, aggs=("max", "sum"), nested=False).program()))
    op = compose(operator_for_program("max", p), operator_for_program("sum", p))
    space = instrumentation_space(p, op)
    sel = {q: rng.choice(cs) for q, cs in space.items()}
    ip = instrument(p, op, sel)
    assert compare(ip, run_pair(ip, seed)) == []
