import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mapper_stability import OrderedPointCloud, load_cloud

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

X12 = [1.4, 1.8, 2.4, 3.2, 4.2, 5.4, 6.8, 8.4, 10.2, 12.2, 15, 16]


def circle_cloud(n=100, radius=1.5, center=(-1.0, 0.0)):
    t = 2 * math.pi * np.arange(n) / n
    return OrderedPointCloud(np.c_[center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def sandwich_values():
    """s between two chains; s sits in the eps-balls of the cores q and p only.

    Index 0 is s, 1 is q, 2 is p; then the q chain, then the p chain.
    """
    q_chain = [-0.5 - 0.16 * i for i in range(1, 7)]
    p_chain = [0.5 + 0.16 * i for i in range(1, 7)]
    return [0.0, -0.5, 0.5] + q_chain + p_chain


def sandwich_cloud():
    return load_cloud([[v] for v in sandwich_values()])


@pytest.fixture
def circle():
    return circle_cloud()


@pytest.fixture
def x12():
    return load_cloud([[v] for v in X12])


@pytest.fixture
def sandwich():
    return sandwich_cloud()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
