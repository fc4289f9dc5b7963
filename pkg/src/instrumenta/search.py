"""Counterexample-guided search for an instrumentation that verifies.

Candidates are all selections of the instrumentation space.  Each
round picks one, instruments the program and asks the oracle:

* correct: done, the program is verified;
* a failing assertion that was already in the program: the program is
  wrong, and the run is projected back onto it;
* a failing assertion added by instrumentation: every selection that
  agrees with the picked one on the rewritable points the run went
  through would fail the same way, so all of them are dropped;
* unknown: the selection is tried again later with a larger budget.

When only unknown selections are left, the search can restart with one
more copy of the operator composed in.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

from .instrumentation.operators import (BOT, InstrumentationOperator, InstrumentedProgram, compose,
                                        instrument, instrumentation_space)
from .lang import ast as A
from .oracle.backtranslate import back_translate_cex, back_translate_formula, is_original_failure
from .oracle.verdicts import Correct, Incorrect, Unknown, Verdict
from .semantics import Step


class EmptyCandidateSet(Exception):
    pass


class OracleFailure(Exception):
    """The oracle raised instead of answering."""

    def __init__(self, selection: dict, cause: BaseException):
        super().__init__(f"oracle failed on selection {format_selection(selection)}: {cause!r}")
        self.selection = selection
        self.cause = cause


def format_selection(sel: dict) -> dict:
    return {str(p): ("bot" if c is BOT else c) for p, c in sorted(sel.items())}


def _key(sel: dict) -> tuple:
    return tuple(sorted(sel.items(), key=lambda kv: kv[0]))


# --------------------------------------------------------------- candidates

class CandidateSet:
    """The selections of a space minus those extending a blocked partial
    assignment."""

    def __init__(self, space: dict[int, list]):
        self.points = sorted(space)
        self.choices = {p: list(space[p]) for p in self.points}
        self.blocks: list[dict] = []

    def block(self, partial: dict) -> None:
        for p, c in partial.items():
            if p not in self.choices or c not in self.choices[p]:
                raise ValueError(f"{p} -> {c!r} is outside the space")
        self.blocks.append(dict(partial))

    def __contains__(self, sel: dict) -> bool:
        if set(sel) != set(self.points) or any(sel[p] not in self.choices[p] for p in self.points):
            return False
        return not any(all(sel[p] == c for p, c in b.items()) for b in self.blocks)

    def _walk(self, order: Callable[[int], list], skip=frozenset(), limit_bots: int | None = None
              ) -> Iterator[dict]:
        """Members depth first, trying choices in ``order(point)``."""
        pts = self.points
        blocks = self.blocks
        sel: dict = {}

        def go(k, live, bots):
            if limit_bots is not None and bots > limit_bots:
                return
            if k == len(pts):
                if _key(sel) not in skip:
                    yield dict(sel)
                return
            p = pts[k]
            for c in order(p):
                sel[p] = c
                nxt = [b for b in live if b.get(p, c) == c]
                # a block whose every point is now fixed and equal excludes sel
                if any(all(q in sel for q in b) for b in nxt):
                    continue
                yield from go(k + 1, nxt, bots + (c is BOT))
            sel.pop(p, None)

        yield from go(0, [b for b in blocks if b], 0)

    def __iter__(self) -> Iterator[dict]:
        if any(not b for b in self.blocks):
            return iter(())
        return self._walk(lambda p: self.choices[p])

    def count(self) -> int:
        if any(not b for b in self.blocks):
            return 0
        pts = self.points
        sizes = [len(self.choices[p]) for p in pts]
        suffix = [1] * (len(pts) + 1)
        for k in range(len(pts) - 1, -1, -1):
            suffix[k] = suffix[k + 1] * sizes[k]
        sel: dict = {}

        def go(k, live):
            if not live:
                return suffix[k]
            if k == len(pts):
                return 1
            p = pts[k]
            total = 0
            for c in self.choices[p]:
                sel[p] = c
                nxt = []
                dead = False
                for b in live:
                    if b.get(p, c) != c:
                        continue
                    if all(q in sel for q in b):
                        dead = True
                        break
                    nxt.append(b)
                if not dead:
                    total += go(k + 1, nxt)
            sel.pop(p, None)
            return total

        return go(0, list(self.blocks))

    def is_empty(self) -> bool:
        return next(iter(self), None) is None


def refine(cand: CandidateSet, r: dict, cex_points) -> CandidateSet:
    """Drop every selection agreeing with ``r`` on ``cex_points``; with no
    such points only ``r`` itself goes."""
    pts = [p for p in cex_points if p in r]
    cand.block({p: r[p] for p in (pts or r)})
    return cand


def pick(cand: CandidateSet, strategy: str = "all-first", skip=frozenset()) -> dict:
    """``all-first``: fewest unrewritten points first, rules before BOT
    and in rule order; ``lex``: lexicographic over the same choice
    order."""
    if any(not b for b in cand.blocks):
        raise EmptyCandidateSet()
    if strategy == "lex":
        for sel in cand._walk(lambda p: cand.choices[p], skip):
            return sel
        raise EmptyCandidateSet()
    if strategy != "all-first":
        raise ValueError(f"unknown pick strategy {strategy!r}")
    for bots in range(len(cand.points) + 1):
        for sel in cand._walk(lambda p: cand.choices[p], skip, limit_bots=bots):
            return sel
    raise EmptyCandidateSet()


# ------------------------------------------------------------------ search

@dataclass
class SearchConfig:
    strategy: str = "all-first"
    budget: int = 1  # oracle budget factor for a first check
    max_budget: int = 4  # unknown selections are rechecked up to this factor
    max_operators: int = 1  # copies of the operator escalation may compose
    deadline: float | None = None  # seconds
    jobs: int = 1
    log: Callable[[dict], None] | None = None


@dataclass
class Verified:
    selection: dict
    witness: dict | None = None
    operator: InstrumentationOperator | None = None
    program: InstrumentedProgram | None = None
    iterations: int = 0
    log: list = field(default_factory=list)

    kind = "verified"


@dataclass
class Refuted:
    """An original assertion fails; ``trace`` is a run of the original."""
    trace: list[Step]
    point: int | None = None
    selection: dict | None = None
    marker: str | None = None
    iterations: int = 0
    log: list = field(default_factory=list)

    kind = "incorrect"


@dataclass
class Inconclusive:
    reason: str
    iterations: int = 0
    log: list = field(default_factory=list)

    kind = "inconclusive"


SearchResult = Verified | Refuted | Inconclusive


def escalated(op: InstrumentationOperator, copies: int) -> InstrumentationOperator:
    """``op`` composed with itself ``copies`` times, ghosts kept apart."""
    out = op
    for k in range(2, copies + 1):
        out = compose(out, replace(op, name=f"{op.name}#{k}"))
    return out


def _cex_points(ip: InstrumentedProgram, trace: list[Step], space: dict) -> set:
    return {ip.owner[st.point] for st in trace if st.point in ip.owner} & set(space)


def _witness(v: Correct, ip: InstrumentedProgram) -> dict | None:
    if v.witness is None:
        return None
    return {ip.owner.get(pt, pt): back_translate_formula(f, ip.operator) for pt, f in v.witness.items()}


def search(p: A.Program, op: InstrumentationOperator, oracle: Callable[[A.Program, int], Verdict],
           cfg: SearchConfig | None = None) -> SearchResult:
    cfg = cfg or SearchConfig()
    start = time.monotonic()
    log: list[dict] = []
    iteration = 0
    pool = ThreadPoolExecutor(cfg.jobs) if cfg.jobs > 1 else None

    def record(sel, verdict, cand):
        nonlocal iteration
        iteration += 1
        entry = {"iteration": iteration, "selection": format_selection(sel),
                 "verdict": verdict, "candidatesRemaining": cand.count()}
        log.append(entry)
        if cfg.log:
            cfg.log(entry)

    def ask(ip, sel, budget):
        try:
            return oracle(ip.program, budget)
        except Exception as ex:
            raise OracleFailure(sel, ex) from ex

    try:
        for copies in range(1, cfg.max_operators + 1):
            current = escalated(op, copies)
            space = instrumentation_space(p, current)
            cand = CandidateSet(space)
            tried: set = set()  # selections handed to the oracle at least once
            retry: list[tuple[dict, int]] = []
            gave_up = False
            inflight: dict = {}

            def next_job():
                try:
                    sel = pick(cand, cfg.strategy, skip=frozenset(tried))
                    return sel, cfg.budget
                except EmptyCandidateSet:
                    pass
                while retry:
                    sel, budget = retry.pop(0)
                    if sel in cand and _key(sel) not in {_key(s) for s, _, _ in inflight.values()}:
                        return sel, budget
                return None

            while True:
                if cfg.deadline is not None and time.monotonic() - start > cfg.deadline:
                    return Inconclusive("deadline reached", iteration, log)
                while len(inflight) < max(cfg.jobs, 1):
                    job = next_job()
                    if job is None:
                        break
                    sel, budget = job
                    tried.add(_key(sel))
                    ip = instrument(p, current, sel)
                    if pool is None:
                        fut = _Done(ask(ip, sel, budget))
                    else:
                        fut = pool.submit(ask, ip, sel, budget)
                    inflight[fut] = (sel, budget, ip)
                if not inflight:
                    break
                if pool is None:
                    done = list(inflight)
                else:
                    done, _ = wait(list(inflight), return_when=FIRST_COMPLETED)
                for fut in done:
                    sel, budget, ip = inflight.pop(fut)
                    v = fut.result()
                    if isinstance(v, Correct):
                        record(sel, "correct", cand)
                        return Verified(sel, _witness(v, ip), current, ip, iteration, log)
                    if isinstance(v, Incorrect):
                        if v.trace and is_original_failure(v.trace, ip):
                            record(sel, "incorrect", cand)
                            trace = back_translate_cex(v.trace, ip)
                            return Refuted(trace, trace[-1].point, sel, None, iteration, log)
                        refine(cand, sel, _cex_points(ip, v.trace, space))
                        record(sel, "incorrect-added" if v.trace else "incorrect-untraced", cand)
                        continue
                    record(sel, "unknown", cand)
                    if budget * 2 <= cfg.max_budget:
                        retry.append((sel, budget * 2))
                    else:
                        gave_up = True
            if not gave_up:
                return Inconclusive("every selection fails an added assertion", iteration, log)
        return Inconclusive("oracle undecided on the remaining selections", iteration, log)
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)


class _Done:
    """A finished result standing in for a future in single-worker mode."""

    def __init__(self, value):
        self.value = value

    def result(self):
        return self.value


def log_writer(stream) -> Callable[[dict], None]:
    """A search log callback writing one JSON object per line."""
    def write(entry: dict):
        stream.write(json.dumps(entry) + "\n")
        stream.flush()
    return write
