"""Exhaustive checking over finite nondet domains.

Every nondet site draws from a finite interval, so the executions of a
program form a finite tree.  The tree is walked depth first, forking
the machine at each nondet statement; children share everything
executed before the fork.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from itertools import product

from ..lang import ast as A
from ..semantics import AssertFailed, Enumerating, Machine, Scripted, _target, run
from .verdicts import Correct, Incorrect, Unknown, Verdict


@dataclass
class BoundedDomain:
    """Intervals for nondet sites (keyed by assigned variable or point id),
    a per-path step budget and a cap on the number of paths.

    With ``exhaustive`` off only ``samples`` random paths are run, so
    the best possible answer is Incorrect or Unknown.
    """
    default: tuple[int, int] = (0, 1)
    per_site: dict = field(default_factory=dict)
    array_len: int = 0
    budget: int = 10_000
    max_paths: int = 1_000_000
    exhaustive: bool = True
    samples: int = 200
    seed: int = 0

    def source(self) -> Enumerating:
        return Enumerating(self.default, self.per_site, self.array_len)

    def scaled(self, factor: int) -> "BoundedDomain":
        """The same domain with step budget and path cap multiplied."""
        return replace(self, budget=self.budget * factor, max_paths=self.max_paths * factor,
                       samples=self.samples * factor)


def _failure(p: A.Program, draws, budget: int) -> Incorrect:
    out = run(p, Scripted(list(draws)), budget)
    assert isinstance(out, AssertFailed), out
    return Incorrect(out.trace, out.point)


def check_bounded(p: A.Program, dom: BoundedDomain | None = None) -> Verdict:
    dom = dom or BoundedDomain()
    if not dom.exhaustive:
        return _sample(p, dom)
    src = dom.source()
    m = Machine(p, dom.budget, record=False)
    pending: list = [None]

    def supply(s, types):
        d, pending[0] = pending[0], None
        return d

    stack = [(m.initial(), None, ())]
    paths = 0
    unknown = None
    while stack:
        state, draws, hist = stack.pop()
        pending[0] = draws
        res = m.run(state, supply)
        tag = res[0]
        if tag == "pause":
            s = res[2]
            doms = [src.domain(s.pid, _target(s), t) for t in m.nondet_types[s.pid]]
            for combo in reversed(list(product(*doms))):
                stack.append((Machine.fork(res[1]), list(combo), hist + combo))
            continue
        paths += 1
        if tag == "assert":
            return _failure(p, hist, dom.budget)
        if tag == "budget":
            unknown = unknown or "step budget exhausted"
        elif tag == "error":
            unknown = unknown or f"runtime error {res[3]} at {res[2].pid}"
        if paths >= dom.max_paths and stack:
            return Unknown(unknown or f"path limit {dom.max_paths} reached")
    return Unknown(unknown) if unknown else Correct()


def _sample(p: A.Program, dom: BoundedDomain) -> Verdict:
    rng = random.Random(dom.seed)
    src = dom.source()
    m = Machine(p, dom.budget, record=False)
    for _ in range(dom.samples):
        hist: list = []

        def supply(s, types):
            combo = [rng.choice(src.domain(s.pid, _target(s), t)) for t in types]
            hist.extend(combo)
            return combo

        res = m.run(m.initial(), supply)
        if res[0] == "assert":
            return _failure(p, hist, dom.budget)
    return Unknown(f"no failure in {dom.samples} sampled paths")
