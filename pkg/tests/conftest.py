import pytest

from photolyase_onset import ReactionParams


@pytest.fixture
def paper_params():
    # 1e-12 M photolyase, 1e-10 M sites, S0*k = 2e-4 s^-1
    return ReactionParams(p0=1e-12, s0=1e-10, k=2e6, t0=100.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
