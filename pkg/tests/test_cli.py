import io
import json
import re

import jsonschema
import pytest

from conftest import ROOT, SAMPLES, needs_solver, solver_cmd
from instrumenta import lang
from instrumenta.cli import main
from instrumenta.semantics import structurally_equivalent

SELECTION = {"type": "object", "additionalProperties": {"type": "string"}}
STEP = {"type": "object", "required": ["point", "vars"],
        "properties": {"point": {"type": "integer"}, "vars": {"type": "object"},
                       "draws": {"type": "array"}}}
CHECK = {
    "type": "object",
    "required": ["result", "operator", "oracle", "seed", "iterations", "space"],
    "properties": {
        "result": {"enum": ["verified", "incorrect", "inconclusive"]},
        "operator": {"type": "string"},
        "oracle": {"enum": ["bounded", "chc", "auto"]},
        "seed": {"type": "integer"},
        "iterations": {"type": "integer", "minimum": 0},
        "space": {"type": "integer", "minimum": 1},
        "selection": SELECTION,
        "witness": {"type": ["object", "null"], "additionalProperties": {"type": "string"}},
        "point": {"type": ["integer", "null"]},
        "trace": {"type": "array", "items": STEP},
        "reason": {"type": "string"},
    },
    "allOf": [
        {"if": {"properties": {"result": {"const": "verified"}}},
         "then": {"required": ["selection", "witness"]}},
        {"if": {"properties": {"result": {"const": "incorrect"}}},
         "then": {"required": ["point", "trace"]}},
        {"if": {"properties": {"result": {"const": "inconclusive"}}},
         "then": {"required": ["reason"]}},
    ],
}
POINT_MAP = {
    "type": "object",
    "required": ["operator", "selection", "pointMap", "owner", "regions", "addedAsserts"],
    "properties": {
        "selection": SELECTION,
        "pointMap": {"type": "object", "additionalProperties": {"type": "integer"}},
        "owner": {"type": "object", "additionalProperties": {"type": "integer"}},
        "regions": {"type": "object", "additionalProperties": {"type": "array"}},
        "addedAsserts": {"type": "array", "items": {"type": "integer"}},
    },
}
CONDITIONS = {
    "type": "object",
    "required": ["operator", "seed", "passed", "results"],
    "properties": {
        "passed": {"type": "boolean"},
        "results": {"type": "array", "items": {
            "type": "object",
            "required": ["condition", "rule", "passed", "samples", "counterexample"],
            "properties": {"condition": {"enum": ["init", "terminate", "frame", "preserve", "agree"]},
                           "counterexample": {"type": ["object", "null"]}}}},
    },
}
RUN_STEP = {"type": "object", "required": ["step", "point", "vars"]}
RUN_END = {"type": "object", "required": ["outcome"],
           "properties": {"outcome": {"enum": ["Terminated", "AssertFailed", "Blocked",
                                               "BudgetExceeded", "RunError"]}}}
LOG_LINE = {"type": "object",
            "required": ["iteration", "selection", "verdict", "candidatesRemaining"],
            "properties": {"selection": SELECTION}}


def cli(*argv):
    """Exit code and stdout of one command."""
    out = io.StringIO()
    try:
        code = main([str(a) for a in argv], out)
    except SystemExit as ex:
        code = ex.code
    return code, out.getvalue()


def sample(name):
    return SAMPLES / name


# --------------------------------------------------------------------- check

def test_check_verifies_triangular_and_names_the_rules():
    code, text = cli("check", sample("triangular.cw"), "--op", "square", "--nondet-range", "1:8")
    assert code == 0
    assert re.search(r"\[7\] i = i \+ 1;\s+R2", text)
    assert re.search(r"\[9\] Int NN = N \* N;\s+R4", text)


def test_check_json_verified():
    code, text = cli("check", sample("triangular.cw"), "--op", "square", "--nondet-range", "1:8",
                     "--format", "json")
    doc = json.loads(text)
    jsonschema.validate(doc, CHECK)
    assert code == 0 and doc["result"] == "verified" and doc["space"] == 16
    assert (doc["selection"]["7"], doc["selection"]["9"]) == ("R2", "R4")


def test_check_json_incorrect():
    code, text = cli("check", sample("triangular_mutated.cw"), "--op", "square",
                     "--nondet-range", "1:8", "--format", "json")
    doc = json.loads(text)
    jsonschema.validate(doc, CHECK)
    assert code == 1 and doc["trace"][-1]["point"] == doc["point"]


def test_check_assert_false_prints_the_trace():
    code, text = cli("check", sample("assert_false.cw"), "--op", "sum")
    assert code == 1 and "assert(false)" in text


def test_check_inconclusive_with_sampling():
    code, text = cli("check", sample("sum_random_order.cw"), "--op", "sum", "--sample", "50",
                     "--nondet-range", "-3:3", "--format", "json")
    doc = json.loads(text)
    jsonschema.validate(doc, CHECK)
    assert code == 2 and doc["result"] == "inconclusive"


def test_check_missing_file():
    assert cli("check", "missing.cw")[0] == 3


def test_check_parse_error(tmp_path):
    bad = tmp_path / "bad.cw"
    bad.write_text("while (")
    assert cli("check", bad, "--op", "square")[0] == 3


def test_check_type_error(tmp_path):
    bad = tmp_path / "bad.cw"
    bad.write_text("Int x = true;")
    assert cli("check", bad, "--op", "square")[0] == 3


def test_check_unknown_operator():
    assert cli("check", sample("triangular.cw"), "--op", "median")[0] == 3


def test_check_bad_flag():
    assert cli("check", sample("triangular.cw"), "--oracle", "psychic")[0] == 3


def test_check_writes_log_and_plot(tmp_path):
    log, png = tmp_path / "log.jsonl", tmp_path / "progress.png"
    code, _ = cli("check", sample("triangular_mutated.cw"), "--op", "square", "--nondet-range", "1:8",
                  "--log", log, "--plot", png)
    assert code == 1
    lines = [json.loads(l) for l in log.read_text().splitlines()]
    for line in lines:
        jsonschema.validate(line, LOG_LINE)
    assert png.stat().st_size > 0


def test_check_with_parallel_jobs():
    assert cli("check", sample("triangular.cw"), "--op", "square", "--nondet-range", "1:8",
               "--jobs", "3")[0] == 0


@needs_solver
def test_check_with_the_horn_solver():
    code, text = cli("check", sample("max_eq.cw"), "--op", "max", "--oracle", "chc",
                     "--solver-cmd", solver_cmd(), "--format", "json")
    doc = json.loads(text)
    jsonschema.validate(doc, CHECK)
    # the loop invariant talks about the infinite maximum, which has no
    # source syntax, so no witness comes back
    assert code == 0 and doc["result"] == "verified" and doc["witness"] is None


@needs_solver
def test_solver_witness_is_printed_over_program_variables():
    code, text = cli("check", sample("triangular.cw"), "--op", "square", "--oracle", "chc",
                     "--solver-cmd", solver_cmd(), "--format", "json")
    doc = json.loads(text)
    assert code == 0
    (formula,) = doc["witness"].values()
    assert formula.startswith("\\exists_vars(Int x_sq, Int x_shad)")


# ---------------------------------------------------------------- instrument

def test_instrument_full_forall_matches_the_fixture(tmp_path):
    out, pm = tmp_path / "out.cw", tmp_path / "pm.json"
    code, _ = cli("instrument", sample("forall_index.cw"), "--op", "forall", "--full", "-o", out, "--pointmap", pm)
    assert code == 0
    got = lang.load(out.read_text(), fresh_names=True)
    want = lang.load(sample("forall_index_expected.cw").read_text(), fresh_names=True)
    assert structurally_equivalent(got, want)
    doc = json.loads(pm.read_text())
    jsonschema.validate(doc, POINT_MAP)
    assert doc["addedAsserts"]


def test_instrument_with_a_selection_file_reproduces_the_fixture():
    code, text = cli("instrument", sample("triangular.cw"), "--op", "square",
                     "--selection", sample("triangular_selection.json"))
    assert code == 0
    want = lang.load(sample("triangular_instr.cw").read_text(), fresh_names=True)
    assert structurally_equivalent(lang.load(text, fresh_names=True), want)


def test_instrument_empty_selection_only_adds_ghost_inits():
    code, text = cli("instrument", sample("triangular.cw"), "--op", "square")
    assert code == 0
    lines = [l for l in text.splitlines() if l.strip()]
    assert lines[:2] == ["Int x_sq = 0;", "Int x_shad = 0;"]
    assert lang.load("\n".join(lines[2:])).body == lang.load(sample("triangular.cw").read_text()).body


def test_instrument_lists_sixteen_candidates():
    code, text = cli("instrument", sample("triangular.cw"), "--op", "square", "--list-space")
    assert code == 0 and "16 selection(s)" in text


def test_instrument_rejects_a_bad_selection(tmp_path):
    sel = tmp_path / "sel.json"
    sel.write_text('{"7": "R4"}')
    assert cli("instrument", sample("triangular.cw"), "--op", "square", "--selection", sel)[0] == 3


# ----------------------------------------------------------------------- run

def test_run_with_script_terminates():
    code, text = cli("run", sample("forall_index.cw"), "--script", "N=3")
    lines = [json.loads(l) for l in text.splitlines()]
    for line in lines[:-1]:
        jsonschema.validate(line, RUN_STEP)
    jsonschema.validate(lines[-1], RUN_END)
    assert code == 0 and lines[-1]["outcome"] == "Terminated"
    assert lines[-1]["final"]["i"] == 3


def test_run_failing_program():
    code, text = cli("run", sample("assert_false.cw"))
    assert code == 1 and json.loads(text.splitlines()[-1])["outcome"] == "AssertFailed"


def test_run_is_seeded():
    assert cli("run", sample("forall_index.cw"), "--seed", "4", "--range", "-2:5") == \
           cli("run", sample("forall_index.cw"), "--seed", "4", "--range", "-2:5")


# ---------------------------------------------------------------- export-chc

def test_export_of_the_instrumented_fixture_has_one_predicate(tmp_path):
    out = tmp_path / "q.smt2"
    code, _ = cli("export-chc", sample("triangular_instr.cw"), "-o", out)
    text = out.read_text()
    assert code == 0 and text.startswith("(set-logic HORN)")
    assert text.count("(declare-fun inv_") == 1


def test_export_refuses_aggregates():
    assert cli("export-chc", sample("forall_index.cw"))[0] == 3


def test_export_after_instrumenting():
    code, text = cli("export-chc", sample("forall_index.cw"), "--op", "forall")
    assert code == 0 and "(set-logic HORN)" in text


# ------------------------------------------------------------ check-operator

def test_check_operator_file_passes():
    assert cli("check-operator", ROOT / "ops" / "square.op.toml", "--samples", "2000")[0] == 0


def test_check_operator_json():
    code, text = cli("check-operator", "max", "--samples", "500", "--format", "json")
    doc = json.loads(text)
    jsonschema.validate(doc, CONDITIONS)
    assert code == 0 and doc["passed"]


def test_check_operator_rejects_a_broken_file(tmp_path):
    src = (ROOT / "ops" / "square.op.toml").read_text()
    broken = tmp_path / "broken.op.toml"
    broken.write_text(src.replace("x_shad = $y;", "", 1))
    code, text = cli("check-operator", broken, "--samples", "2000")
    assert code == 1


def test_check_operator_missing_file():
    assert cli("check-operator", "nowhere.op.toml")[0] == 3


# -------------------------------------------------------------------- report

def test_report_renders_a_log(tmp_path):
    log, png = tmp_path / "log.jsonl", tmp_path / "r.png"
    cli("check", sample("triangular.cw"), "--op", "square", "--nondet-range", "1:8", "--strategy", "lex",
        "--log", log)
    assert cli("report", log, "-o", png)[0] == 0
    assert png.read_bytes()[:4] == b"\x89PNG"


def test_no_command_is_a_usage_error():
    assert cli()[0] == 3
