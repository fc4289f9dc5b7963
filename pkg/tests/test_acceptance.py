"""Acceptance criteria, one test each.  Every test records a PASS/FAIL
line that is printed in the "acceptance criteria" section at the end of
the pytest run (run this file alone with ``pytest tests/test_acceptance.py``)."""
import random
import time

import pytest

from conftest import ACCEPTANCE, SAMPLES, load_sample, needs_solver, solver_cmd
from harness import (OPERATORS, aggregate_mismatches, compare, random_case, run_pair)
from instrumenta import lang
from instrumenta.instrumentation import (BOT, builtin_operator, collapse_split_temporaries,
                                         full_selection, instrument, instrumentation_space,
                                         operator_for_program)
from instrumenta.instrumentation.conditions import check_operator_conditions, standard_mutants
from instrumenta.lang import ast as A
from instrumenta.oracle import (BoundedDomain, BoundedOracle, ChcOracle, Correct,
                                back_translate_formula, check_bounded)
from instrumenta.search import Refuted, Verified, search
from instrumenta.semantics import AssertFailed, Scripted, eval_expr, replay, run, structurally_equivalent
from progen import OPERATOR_AGGREGATE, aggregate_program, random_selection

# limits stated by the criteria
FIXTURE_SECONDS = 1.0
DIFFERENTIAL_TUPLES = 1000
DIFFERENTIAL_SECONDS = 300.0
CONDITION_SAMPLES = 10_000
CONDITION_SECONDS = 300.0
AGGREGATE_TRACES = 1000
COMPLETENESS_SECONDS = 600.0
SPACE_SIZE = 16
SOLVER_SECONDS = 60.0


def record(k: int, ok: bool, detail: str):
    ACCEPTANCE.append(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(ACCEPTANCE[-1])


def square_fixture_selection(p, op):
    space = instrumentation_space(p, op)
    return {q: ("R2" if "R2" in cs else "R4" if "R4" in cs else BOT) for q, cs in space.items()}


# ------------------------------------------------------------------ 1

def test_1_golden_fixtures():
    t0 = time.perf_counter()
    forall_index = load_sample("forall_index.cw")
    op = operator_for_program("forall", forall_index)
    got_forall = instrument(forall_index, op, full_selection(instrumentation_space(forall_index, op))).program
    want_forall = lang.load((SAMPLES / "forall_index_expected.cw").read_text(), fresh_names=True)
    tri = load_sample("triangular.cw")
    sq = builtin_operator("square")
    got_square = instrument(tri, sq, square_fixture_selection(tri, sq)).program
    want_square = lang.load((SAMPLES / "triangular_expected.cw").read_text(), fresh_names=True)
    same_forall = structurally_equivalent(got_forall, want_forall)
    same_square = structurally_equivalent(collapse_split_temporaries(got_square), want_square)
    took = time.perf_counter() - t0
    ok = same_forall and same_square and took < FIXTURE_SECONDS
    record(1, ok, f"quantifier fixture {same_forall}, square fixture {same_square}, {took:.3f}s "
                  f"(limit {FIXTURE_SECONDS}s)")
    assert ok


# ------------------------------------------------------------------ 2

def test_2_differential_suite():
    t0 = time.perf_counter()
    per_op = -(-DIFFERENTIAL_TUPLES // len(OPERATORS))
    tuples, problems = 0, []
    for name in OPERATORS:
        rng = random.Random(f"differential-{name}")
        for seed in range(per_op):
            ip = random_case(rng, name)
            found = compare(ip, run_pair(ip, seed))
            tuples += 1
            if found:
                problems.append((name, seed, found[0]))
    took = time.perf_counter() - t0
    ok = not problems and tuples >= DIFFERENTIAL_TUPLES and took < DIFFERENTIAL_SECONDS
    record(2, ok, f"{tuples} tuples over {len(OPERATORS)} operators, {len(problems)} violations, "
                  f"{took:.1f}s (limit {DIFFERENTIAL_SECONDS:.0f}s)")
    assert ok, problems[:3]


# ------------------------------------------------------------------ 3

SHIPPED = ("square", "forall", "exists", "max", "min", "sum", "product", "numof",
           "exists-nc", "product-nc")


def test_3_operator_conditions():
    t0 = time.perf_counter()
    eq = A.Lambda("x", "i", A.Eq(A.Var("x"), A.Var("i")))
    failing = []
    for name in SHIPPED:
        report = check_operator_conditions(builtin_operator(name, eq), samples=CONDITION_SAMPLES)
        if not report.passed:
            failing.append(name)
    undetected = []
    for mutant in standard_mutants():
        fails = check_operator_conditions(mutant, samples=CONDITION_SAMPLES).failures()
        if not fails or not all(f.counterexample for f in fails):
            undetected.append(mutant.name)
    took = time.perf_counter() - t0
    ok = not failing and not undetected and took < CONDITION_SECONDS
    record(3, ok, f"{len(SHIPPED) - len(failing)}/{len(SHIPPED)} operators pass, "
                  f"{len(standard_mutants()) - len(undetected)}/8 mutants rejected with a state, "
                  f"{took:.1f}s (limit {CONDITION_SECONDS:.0f}s)")
    assert ok, (failing, undetected)


# ------------------------------------------------------------------ 4

# aggregator -> operator that rewrites it
AGGREGATORS = {
    "sum": "sum", "max": "max", "min": "min", "product": "product-nc", "numof": "numof",
    "forall": "forall", "exists": "exists-nc", "exists-cancellative": "exists",
    "product-cancellative": "product",
}


def test_4_rewritten_aggregates_match_brute_force():
    summary, bad = [], []
    for agg, name in AGGREGATORS.items():
        rng = random.Random(f"aggregates-{agg}")
        traces = checked = runs = 0
        while traces < AGGREGATE_TRACES:
            p = lang.normalize(lang.load(aggregate_program(rng, OPERATOR_AGGREGATE[name])))
            op = operator_for_program(name, p)
            space = instrumentation_space(p, op)
            sel = full_selection(space) if runs % 2 else random_selection(rng, space)
            ip = instrument(p, op, sel)
            pair = run_pair(ip, runs)
            runs += 1
            n, wrong = aggregate_mismatches(ip, pair.instrumented.trace, pair.finished)
            bad += [(agg, w) for w in wrong]
            checked += n
            traces += n > 0
        summary.append(f"{agg} {checked}")
    ok = not bad
    record(4, ok, f"{AGGREGATE_TRACES} traces per aggregator, rewritten results checked: "
                  f"{', '.join(summary)}; {len(bad)} mismatches")
    assert ok, bad[:3]


# ------------------------------------------------------------------ 5

COMPLETENESS = {
    "battery.cw": "max", "forall_index.cw": "forall", "min_scan.cw": "min", "sum_scan.cw": "sum",
    "sum_update.cw": "sum", "numof_positive.cw": "numof", "exists_zero.cw": "exists",
    "product_scan.cw": "product", "max_fill.cw": "max", "forall_nonneg.cw": "forall",
}
COMPLETENESS_DOMAIN = BoundedDomain(default=(-3, 3), per_site={"n": (0, 6), "N": (0, 6)},
                                    array_len=6, budget=100_000, max_paths=10_000_000)


def aggregate_free(p) -> bool:
    return not any(isinstance(x, (A.Quant, A.Aggregate))
                   for s in A.walk(p.body) for e in A.stmt_exprs(s) for x in A.subexprs(e))


@pytest.mark.slow
def test_5_completeness_corpora():
    t0 = time.perf_counter()
    results = {}
    for fname, name in COMPLETENESS.items():
        p = lang.normalize(load_sample(f"completeness/{fname}"))
        op = operator_for_program(name, p)
        ip = instrument(p, op, full_selection(instrumentation_space(p, op)))
        free = aggregate_free(ip.program)
        verdict = check_bounded(ip.program, COMPLETENESS_DOMAIN)
        results[fname] = (free, isinstance(verdict, Correct), verdict)
    took = time.perf_counter() - t0
    failed = [f for f, (free, good, _) in results.items() if not (free and good)]
    ok = not failed and took < COMPLETENESS_SECONDS
    record(5, ok, f"{len(results) - len(failed)}/{len(results)} programs aggregate-free and "
                  f"correct under exhaustive bounded execution, {took:.0f}s "
                  f"(limit {COMPLETENESS_SECONDS:.0f}s)")
    assert ok, {f: results[f] for f in failed}


# ------------------------------------------------------------------ 6

def test_6_search_behaviour():
    oracle = BoundedOracle(BoundedDomain(default=(1, 8), budget=10_000))
    tri = load_sample("triangular.cw")
    sq = builtin_operator("square")
    space = instrumentation_space(tri, sq)
    c, d = sorted(space)[2:]
    good = search(tri, sq, oracle)
    verified = isinstance(good, Verified) and (good.selection[c], good.selection[d]) == ("R2", "R4")
    mutated = load_sample("triangular_mutated.cw")
    bad = search(mutated, sq, oracle)
    refuted = isinstance(bad, Refuted) and isinstance(replay(mutated, bad.trace), AssertFailed)
    iterations = max(good.iterations, bad.iterations)
    ok = verified and refuted and iterations <= SPACE_SIZE
    record(6, ok, f"triangular verified with C->R2, D->R4: {verified}; mutant refuted with a "
                  f"replayable trace: {refuted}; at most {iterations} iterations (limit {SPACE_SIZE})")
    assert ok


# ------------------------------------------------------------------ 7

REFERENCE_WITNESS = "i == x_shad && x_sq + x_shad == 2 * s && N >= i && N >= 1 && 2 * s >= i && i >= 0"
REFERENCE_ORIGINAL = ("\\exists_vars(Int x_sq, Int x_shad).(i == x_shad && x_sq + x_shad == 2 * s && "
                      "N >= i && N >= 1 && 2 * s >= i && i >= 0 && x_sq == x_shad * x_shad)")


def flat(e) -> list:
    if isinstance(e, A.And):
        return flat(e.l) + flat(e.r)
    return [e]


def test_7_witness_back_translation():
    got = back_translate_formula(lang.parse_expr(REFERENCE_WITNESS), builtin_operator("square"))
    want = lang.parse_expr(REFERENCE_ORIGINAL)
    syntactic = got.bound == want.bound and flat(got.body) == flat(want.body)
    tri = load_sample("triangular.cw")
    loop = next(s.pid for s in A.walk(tri.body) if isinstance(s, A.While))
    states = [st.vars for n in range(1, 9)
              for st in run(tri, Scripted.parse(f"N={n}")).trace if st.point == loop]
    holds = all(eval_expr(got, s) for s in states)
    ok = syntactic and holds and states
    record(7, ok, f"back-translated formula matches the reference formula: {syntactic}; true at all "
                  f"{len(states)} loop-head states for N in [1, 8]: {holds}")
    assert ok


# ------------------------------------------------------------------ 8

@needs_solver
def test_8_unbounded_verification_with_a_horn_solver():
    oracle = ChcOracle(solver_cmd(), timeout=SOLVER_SECONDS)
    lines, ok = [], True
    for fname, name in (("max_eq.cw", "max"), ("triangular.cw", "square")):
        p = load_sample(fname)
        t0 = time.perf_counter()
        res = search(p, operator_for_program(name, p), oracle)
        took = time.perf_counter() - t0
        good = isinstance(res, Verified) and took < SOLVER_SECONDS
        ok &= good
        lines.append(f"{fname} {'verified' if isinstance(res, Verified) else res.kind} in {took:.1f}s")
    record(8, ok, f"{'; '.join(lines)} (limit {SOLVER_SECONDS:.0f}s each)")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
