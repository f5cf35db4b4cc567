import math

import hypothesis
import numpy as np
import pytest

from cuspidal import RobotParams

hypothesis.settings.register_profile(
    "suite", max_examples=60, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("suite")


@pytest.fixture(scope="session")
def example_robot():
    """The standard cuspidal demonstration geometry (four cusps)."""
    return RobotParams(1.0, 2.0, 1.5, 1.0, 0.0)


@pytest.fixture(scope="session")
def eight_cusp_robot():
    return RobotParams(1.0, 0.91, 0.94, 0.3, 0.9)


@pytest.fixture(scope="session")
def rule6_robot():
    """Mutually orthogonal axes, first joint offset zero: non-cuspidal."""
    return RobotParams(1.0, 2.0, 1.5, 0.0, 0.0)


@pytest.fixture(scope="session")
def rule7_robot():
    return RobotParams(1.0, 0.5, 3.0, 1.0, 0.0)


def random_orthogonal_robot(rng, r3_zero=False):
    d3 = rng.uniform(0.25, 2.8)
    d4 = rng.uniform(0.25, 2.8)
    r2 = rng.uniform(0.15, 2.0)
    r3 = 0.0 if r3_zero else rng.uniform(-1.2, 1.2)
    return RobotParams(1.0, d3, d4, r2, r3)


def random_general_robot(rng):
    d3 = rng.uniform(0.3, 2.5)
    d4 = rng.uniform(0.3, 2.5)
    r2 = rng.uniform(0.2, 1.8)
    r3 = rng.uniform(-1.0, 1.0)
    a2 = rng.choice([-1, 1]) * rng.uniform(0.5, math.pi - 0.5)
    a3 = rng.choice([-1, 1]) * rng.uniform(0.5, math.pi - 0.5)
    return RobotParams(1.0, d3, d4, r2, r3, a2, a3)


def random_config(rng):
    from cuspidal import JointConfig
    t = rng.uniform(-math.pi, math.pi, 3)
    return JointConfig(*t)
