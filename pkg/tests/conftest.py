import os
import shutil
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from instrumenta import lang

ROOT = Path(__file__).resolve().parent.parent
SAMPLES = ROOT / "samples"

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def load_sample(name: str, **kw):
    return lang.load((SAMPLES / name).read_text(encoding="utf-8"), **kw)


def solver_cmd() -> str | None:
    """A Horn solver to run against: $INSTRUMENTA_SOLVER, else z3 on PATH."""
    cmd = os.environ.get("INSTRUMENTA_SOLVER")
    if cmd:
        return cmd
    return "z3" if shutil.which("z3") else None


needs_solver = pytest.mark.skipif(solver_cmd() is None, reason="no Horn solver configured")


@pytest.fixture
def triangular():
    return load_sample("triangular.cw")


@pytest.fixture
def forall_index():
    return load_sample("forall_index.cw")


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
