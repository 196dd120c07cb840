import numpy as np
import pytest

from tvtrack.experiments import load_preset

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def benchmark_scenario():
    return load_preset("paper_sec4")


@pytest.fixture(scope="session")
def static_scenario():
    return load_preset("static_quadratic")


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion."""

    def record(criterion: str, passed: bool, detail: str = ""):
        _ACCEPTANCE.append((criterion, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {criterion}: {detail}")
