"""What an oracle can answer about a program."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..semantics import Step, value_to_json


@dataclass
class Correct:
    """No assertion can fail. ``witness`` maps loop-head labels to
    formulas when the back-end produced inductive invariants."""
    witness: dict | None = None

    kind = "correct"


@dataclass
class Incorrect:
    """An assertion fails; ``trace`` ends at the failing statement.

    An empty trace with ``marker`` set means the back-end reported a
    failure it could not turn into a concrete run.
    """
    trace: list[Step] = field(default_factory=list)
    point: int | None = None
    marker: str | None = None

    kind = "incorrect"


@dataclass
class Unknown:
    reason: str

    kind = "unknown"


Verdict = Correct | Incorrect | Unknown


def trace_to_json(trace: list[Step]) -> list[dict]:
    return [{"point": st.point, "vars": {k: value_to_json(v) for k, v in st.vars.items()},
             **({"draws": [value_to_json(d) for d in st.draws]} if st.draws else {})}
            for st in trace]


def verdict_to_json(v: Verdict) -> dict:
    from ..lang.pretty import expr_str
    match v:
        case Correct(w):
            return {"verdict": "correct",
                    "witness": None if w is None else {k: expr_str(f) for k, f in w.items()}}
        case Incorrect(trace, point, marker):
            return {"verdict": "incorrect", "point": point, "marker": marker,
                    "trace": trace_to_json(trace)}
        case Unknown(reason):
            return {"verdict": "unknown", "reason": reason}
    raise TypeError(v)
