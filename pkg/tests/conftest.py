import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from quasimild import SigmaSpec, build_grid, linear_heat_model, skt_model

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def skt():
    return skt_model((1, 1), (1, 1), (2, 2), (1, 1), np.ones((2, 2)),
                     SigmaSpec.decaying(8, 0.05, kind="affine"))


@pytest.fixture
def skt_grid():
    return build_grid(1.0, 16, "neumann", 2)


@pytest.fixture
def heat():
    return linear_heat_model(1.0, SigmaSpec.decaying(8, 1.0))


@pytest.fixture
def dirichlet_grid():
    return build_grid(1.0, 16, "dirichlet")
