import pytest

from runtumble.core_types import ModelParams, build_grid

# filled by test_acceptance, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def params():
    return ModelParams(0.5, 0.0)


@pytest.fixture
def grid(params):
    return build_grid(params, 20.0, 800)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
