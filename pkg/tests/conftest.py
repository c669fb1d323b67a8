import pytest

from tacmm.harness.config import default_config
from tacmm.harness.experiments import model_for


@pytest.fixture(scope="session")
def scenario():
    return default_config()


@pytest.fixture(scope="session")
def model(scenario):
    """The default regressor (trained once per session)."""
    return model_for(scenario)


CRITERIA = {}


@pytest.fixture(scope="session")
def record():
    """``record(n, passed, detail)`` stores one acceptance verdict for the
    end-of-run summary."""
    def _record(n, passed, detail):
        CRITERIA[n] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'}  criterion {n}: {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        passed, detail = CRITERIA[n]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {n}: {detail}")
