import pytest

from peakscope.model import ProblemParams
from peakscope.sigma import ground_states


@pytest.fixture(scope="session")
def cubic3():
    return ProblemParams(n=3, p=2, q=4, theta=4)


@pytest.fixture(scope="session")
def soliton_params():
    return ProblemParams(n=1, p=2, q=4, theta=4, test_mode=True)


@pytest.fixture(scope="session")
def canonical3(cubic3):
    return ground_states(cubic3).canonical


@pytest.fixture(scope="session")
def soliton(soliton_params):
    return ground_states(soliton_params).canonical


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
