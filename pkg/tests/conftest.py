import numpy as np
import pytest
from hypothesis import settings

from outernorm.data import DistributionSpec, make_teacher

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def teacher_spec(activation="sigmoid", d=10, width=3, seed=0, clip=None, total_weight=1.0):
    t = make_teacher(activation, d, width, seed, total_weight)
    return DistributionSpec(d, "gaussian_iso", teacher=t, clip=clip)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
