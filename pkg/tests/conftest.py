import numpy as np
import pytest
from hypothesis import settings

from vbgk.kinetic import GridSpec
from vbgk.params import ModelParams

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# Acceptance lines collected by tests/test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def params():
    return ModelParams.from_a(0.1, epsilon=0.1, lam=30.0, nu=0.01)


@pytest.fixture
def grid16():
    return GridSpec(16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
