import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from skillflow._kernels import available  # noqa: E402
from skillflow.config import DISABLE_NUMBA_ENV  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(params=available())
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    if request.param == "numpy":
        monkeypatch.setenv(DISABLE_NUMBA_ENV, "1")
    else:
        monkeypatch.delenv(DISABLE_NUMBA_ENV, raising=False)
    return request.param


WORKED_TABLE = """t,decision,x,ell,ell_a,p,theta
1,Manual,0,0.36,0.04,0.20,0.40
2,Manual,0,0.25,0.04,0.25,0.50
3,Delegate,1,---,0.04,0.35,---
4,Delegate,1,---,0.04,0.45,---
5,Manual,0,0.30,0.04,0.40,0.45
"""


@pytest.fixture
def worked_table(tmp_path):
    path = tmp_path / "sessions.csv"
    path.write_text(WORKED_TABLE)
    return path


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def add(number: int, ok: bool, title: str, detail: str, seconds: float):
        ACCEPTANCE_LINES.append(f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail} ({seconds:.2f} s)")

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
