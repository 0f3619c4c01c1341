"""Shared fixtures: bundled scenario paths and a cached six-type solve."""
from pathlib import Path

import pytest

from procure.mechanism import solve
from procure.scenario import load_scenario

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "src" / "procure" / "scenarios"


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIO_DIR


@pytest.fixture(scope="session")
def six_scenario():
    return load_scenario(SCENARIO_DIR / "six_types.yaml")


@pytest.fixture(scope="session")
def six_outcome(six_scenario):
    sc = six_scenario
    return solve(sc.space, sc.model, sc.weather, sc.vprime, sc.grid)


@pytest.fixture(scope="session")
def worst_scenario():
    return load_scenario(SCENARIO_DIR / "simple_worst.yaml")


@pytest.fixture(scope="session")
def worst_outcome(worst_scenario):
    sc = worst_scenario
    return solve(sc.space, sc.model, sc.weather, sc.vprime, sc.grid)
