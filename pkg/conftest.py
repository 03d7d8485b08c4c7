"""
Shared fixtures for the stochastic_pf test suite.
"""

import json

import numpy as np
import pytest

from stochastic_pf.cones import ConeSpec
from stochastic_pf.envpath import EnvironmentPath, Scenario

SQUARE_CONE_FACETS = [[1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def orthant2():
    return ConeSpec.orthant(2)


@pytest.fixture
def orthant3():
    return ConeSpec.orthant(3)


@pytest.fixture
def simplicial2():
    return ConeSpec.simplicial([[2.0, 1.0], [1.0, 2.0]])


@pytest.fixture
def square_cone():
    """Cone over a square: |x1| <= x3, |x2| <= x3."""
    return ConeSpec.polyhedral(SQUARE_CONE_FACETS)


@pytest.fixture
def positive_env():
    return EnvironmentPath(3, Scenario("linear_positive", 4))


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict as JSON under tmp_path and return its path."""
    def _write(document, name="experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path
    return _write
