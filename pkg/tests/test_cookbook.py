"""The shipped scenarios together exercise every registry entry"""
import pytest

from scenario_loader import load_scenario, shipped_scenarios
from settings import (
    BOUNDARY_CHECK_IDS,
    IDENTITY_IDS,
    LINEARIZATION_CHECK_IDS,
    MODEL_NAMES,
    SOLVER_TASKS,
    WEIGHTED_CHECK_IDS,
)


@pytest.fixture(scope="module")
def cookbook():
    return [load_scenario(path) for path in shipped_scenarios()]


@pytest.mark.parametrize("attribute, registry", [
    ("identities", IDENTITY_IDS),
    ("boundary_checks", BOUNDARY_CHECK_IDS),
    ("linearization_checks", LINEARIZATION_CHECK_IDS),
    ("weighted_checks", WEIGHTED_CHECK_IDS),
])
def test_every_check_is_exercised(cookbook, attribute, registry):
    used = {check for scenario in cookbook for check in getattr(scenario, attribute)}
    assert set(registry) <= used


def test_every_model_is_exercised(cookbook):
    assert set(MODEL_NAMES) <= {scenario.model["name"] for scenario in cookbook}


def test_every_solver_task_is_exercised(cookbook):
    assert set(SOLVER_TASKS) <= {scenario.solver["task"] for scenario in cookbook if scenario.solver}


def test_names_are_unique(cookbook):
    names = [scenario.name for scenario in cookbook]
    assert len(names) == len(set(names))
