"""Shared weighted spaces for the test suite"""
import math

import numpy as np
import pytest

from manifold_models import build_model
from quadrature import sample_grid
from weighted_calculus import WeightedSpace, field_from_preset


def weighted(name, density=None, **model_kwargs):
    model = build_model(name, **model_kwargs)
    density = density or {"preset": "zero"}
    return WeightedSpace(model, field_from_preset(model, label="f", **density))


@pytest.fixture
def gaussian_space():
    return weighted("gaussian-chart", {"preset": "gaussian"}, dim=2)


@pytest.fixture
def weighted_sphere():
    return weighted("sphere-spherical", {"preset": "linear", "vector": [0, 0, 1]}, dim=2)


@pytest.fixture
def round_sphere():
    return weighted("sphere-spherical", dim=2)


@pytest.fixture
def hemisphere():
    return weighted("hemisphere", dim=2, cap_angle=math.pi / 2)


@pytest.fixture
def slope_interval():
    return weighted("interval", {"preset": "expr", "expression": "x"}, lower=0.0, upper=1.0)


@pytest.fixture
def circle():
    return weighted("circle")


@pytest.fixture
def samples():
    def make(ws, nodes=4):
        return sample_grid(ws.model, nodes)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CIRCLE_SCENARIO = """
[scenario]
name = circle-check
seed = 2

[model]
name = circle

[potential]
preset = expr
expression = cos(theta)

[checks]
weighted = drift-forms, eigen-relation
eigen_coefficient = {coefficient}

[solver]
task = eigen
basis = fourier-circle
size = 5
count = 3

[grid]
nodes = 16
sample_nodes = 4
"""


@pytest.fixture(scope="session")
def circle_scenario():
    """Scenario text on the circle with u = cos θ; the right eigen coefficient is -1"""
    def text(coefficient="-1"):
        return CIRCLE_SCENARIO.format(coefficient=coefficient)
    return text
