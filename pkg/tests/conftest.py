import math

import numpy as np
import pytest

from crdi.solutions import SolutionConfig, build_solution

FINE = 1.0 / 137.035999


@pytest.fixture(scope="session")
def hydrogen():
    return build_solution(SolutionConfig(family="hydrogen", Z=1.0, alpha=FINE))


@pytest.fixture(scope="session")
def hydrogen_cartesian():
    return build_solution(SolutionConfig(family="hydrogen", chart="cartesian"))


@pytest.fixture(scope="session")
def zero_beta():
    return build_solution(SolutionConfig(family="zero_beta", a=0.6))


@pytest.fixture(scope="session")
def zero_beta_cartesian():
    return build_solution(SolutionConfig(family="zero_beta", a=0.6, chart="cartesian"))


@pytest.fixture(scope="session")
def uniform_b():
    return build_solution(SolutionConfig(family="zero_beta_uniform_b"))


@pytest.fixture(scope="session")
def coulomb_solenoid():
    return build_solution(SolutionConfig(family="zero_beta_coulomb_solenoid", a=0.6))


@pytest.fixture(scope="session")
def free_rest():
    return build_solution(SolutionConfig(family="general_ansatz"))


@pytest.fixture(scope="session")
def planar():
    return build_solution(SolutionConfig(family="planar_2d", chart="cartesian"))


def hydrogen_x(Z=1.0, alpha=FINE):
    za = Z * alpha
    return math.sqrt(1.0 - za * za) / za


def random_spherical(rng, n, r=(0.2, 5.0), theta=(0.2, math.pi - 0.2)):
    return np.column_stack(
        [
            rng.uniform(0.0, 1.0, n),
            rng.uniform(*r, n),
            rng.uniform(*theta, n),
            rng.uniform(-math.pi, math.pi, n),
        ]
    )
