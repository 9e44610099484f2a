import pytest

from blosense.model import SqueezeParams, fit_params

ACCEPTANCE_LINES = []


@pytest.fixture
def reported_a():
    return SqueezeParams.from_squeezed_factor(0.4, 1.75)


@pytest.fixture
def reported_b():
    return SqueezeParams.from_squeezed_factor(0.26, 21.1)


@pytest.fixture
def fitted_a():
    return fit_params(3.9, 5.24)


@pytest.fixture
def criterion(request):
    """Record one acceptance line; call with (passed, detail)."""
    name = request.node.name

    def record(passed, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)
