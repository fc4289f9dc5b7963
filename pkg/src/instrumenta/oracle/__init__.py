"""Back-ends that decide whether a program's assertions can fail."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..lang import ast as A
from .backtranslate import (NotOriginalAssertion, back_translate_cex, back_translate_formula,
                            back_translate_witness, is_original_failure, project_trace)
from .bounded import BoundedDomain, check_bounded
from .chc import ChcScript, UnsupportedNode, encode_chc
from .solver import (SOLVER_ENV, SolverLaunchError, SolverOutputParseError, configured_solver,
                     parse_model, solve_external)
from .verdicts import Correct, Incorrect, Unknown, Verdict, trace_to_json, verdict_to_json


@dataclass
class BoundedOracle:
    """Exhaustive execution over ``domain``; ``budget`` scales its step
    budget and path cap."""
    domain: BoundedDomain = field(default_factory=BoundedDomain)
    name = "bounded"

    def __call__(self, p: A.Program, budget: int = 1) -> Verdict:
        return check_bounded(p, self.domain.scaled(budget))


@dataclass
class ChcOracle:
    """Horn clauses handed to an external solver; ``budget`` scales the
    timeout.  A refutation is turned into a run by bounded search over
    ``replay_domain``."""
    solver_cmd: str | None = None
    timeout: float = 60.0
    replay_domain: BoundedDomain = field(default_factory=lambda: BoundedDomain(default=(-4, 8)))
    name = "chc"

    def __call__(self, p: A.Program, budget: int = 1) -> Verdict:
        try:
            script = encode_chc(p)
        except UnsupportedNode as ex:
            return Unknown(f"cannot encode: {ex}")
        v = solve_external(script, self.solver_cmd, self.timeout * budget)
        if isinstance(v, Incorrect) and not v.trace:
            replayed = check_bounded(p, self.replay_domain)
            if isinstance(replayed, Incorrect):
                return replayed
        return v


@dataclass
class AutoOracle:
    """Bounded search for failures first, then the solver for a proof
    when one is configured."""
    bounded: BoundedOracle = field(default_factory=BoundedOracle)
    chc: ChcOracle = field(default_factory=ChcOracle)
    name = "auto"

    def __call__(self, p: A.Program, budget: int = 1) -> Verdict:
        first = self.bounded(p, budget)
        if isinstance(first, Incorrect) or configured_solver(self.chc.solver_cmd) is None:
            return first
        return self.chc(p, budget)


__all__ = [
    "AutoOracle", "BoundedDomain", "BoundedOracle", "ChcOracle", "ChcScript", "Correct",
    "Incorrect", "NotOriginalAssertion", "SOLVER_ENV", "SolverLaunchError",
    "SolverOutputParseError", "Unknown", "UnsupportedNode", "Verdict", "back_translate_cex",
    "back_translate_formula", "back_translate_witness", "check_bounded", "configured_solver",
    "encode_chc", "is_original_failure", "parse_model", "project_trace", "solve_external", "trace_to_json",
    "verdict_to_json",
]
