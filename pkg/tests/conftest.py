from __future__ import annotations

import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from frsim.linalg import PureState, SystemSpec
from frsim.scenario import fr_scenario, run_deterministic, singlet_scenario

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None, derandomize=True)
settings.register_profile("quick", max_examples=10, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

R3 = 1 / math.sqrt(3)


@pytest.fixture
def fr():
    return fr_scenario()


@pytest.fixture
def singlet():
    return singlet_scenario()


@pytest.fixture
def psi(fr):
    (branch,) = run_deterministic(fr, "superobserver")
    return branch.state


@pytest.fixture
def qubit():
    return SystemSpec("q", 2, ("0", "1"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_state(rng: np.random.Generator, systems) -> PureState:
    d = math.prod(s.dimension for s in systems)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(tuple(systems), v / np.linalg.norm(v))
