import time

import pytest

from hopflax import scenario as scenario_mod
from hopflax import solver as solver_mod

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}

_SOLVES: dict[str, tuple] = {}


def solved_builtin(name: str):
    """``(scenario, result, seconds)`` for a builtin, solved once per session."""
    if name not in _SOLVES:
        sc = scenario_mod.builtin(name)
        t0 = time.perf_counter()
        result = solver_mod.solve(sc)
        _SOLVES[name] = (sc, result, time.perf_counter() - t0)
    return _SOLVES[name]


@pytest.fixture
def builtin_solution():
    return solved_builtin


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
