"""Carrying verification results from an instrumented program back to
the program it came from."""
from __future__ import annotations

from ..instrumentation.operators import InstrumentationOperator, InstrumentedProgram
from ..lang import ast as A
from ..semantics import Step


class NotOriginalAssertion(Exception):
    """The failing assertion was added by instrumentation."""

    def __init__(self, point: int | None):
        super().__init__(f"failing point {point} is not an original assertion")
        self.point = point


def _conjuncts(e) -> list:
    if isinstance(e, A.And):
        return _conjuncts(e.l) + _conjuncts(e.r)
    return [e]


def back_translate_formula(w, op: InstrumentationOperator):
    """``exists ghosts. (w && invariant)``, with the invariant as the last
    conjunct and ghosts bound in declaration order."""
    body = A.conj([*_conjuncts(w), op.invariant])
    return A.ExistsVars(tuple((g.name, g.type) for g in op.ghosts), body)


def back_translate_witness(w: dict, op: InstrumentationOperator) -> dict:
    return {label: back_translate_formula(f, op) for label, f in w.items()}


def is_original_failure(trace: list[Step], ip: InstrumentedProgram) -> bool:
    if not trace:
        return False
    q = trace[-1].point
    return q in ip.owner and q not in ip.added_asserts


def project_trace(trace: list[Step], ip: InstrumentedProgram) -> list[Step]:
    """Group the steps of an instrumented run by the original statement
    they execute.

    A group starts whenever the owner changes or the first point of a
    statement's image runs again.  Each group becomes one step carrying
    the last state of the group, restricted to the original variables,
    and all draws made in it.  Ghost initialization is dropped.
    """
    vocab = (ip.original or ip.program).vocab
    out: list[Step] = []
    cur = None
    state: dict = {}
    draws: list = []
    for st in trace:
        o = ip.owner.get(st.point)
        if o is None:
            continue
        if cur is not None and (o != cur or st.point == ip.point_map[o]):
            out.append(Step(cur, state, tuple(draws)))
            draws = []
        cur = o
        state = {k: v for k, v in st.vars.items() if k in vocab}
        draws.extend(st.draws)
    if cur is not None:
        out.append(Step(cur, state, tuple(draws)))
    return out


def back_translate_cex(trace: list[Step], ip: InstrumentedProgram) -> list[Step]:
    """Project a run of the instrumented program that fails an original
    assertion onto the original program."""
    if not is_original_failure(trace, ip):
        raise NotOriginalAssertion(trace[-1].point if trace else None)
    return project_trace(trace, ip)
