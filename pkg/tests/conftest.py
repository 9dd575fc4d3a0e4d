import math
from pathlib import Path

import numpy as np
import pytest

from config.scenario_config import ScenarioConfig
from models.detection_record import DetectionRecord
from models.spacetime_event import DetectionEvent
from physics.scenarios import build_scenario

ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = ROOT / 'scenarios'


@pytest.fixture
def scenario_file():
    def _path(kind: str) -> str:
        return str(SCENARIO_DIR / f'{kind}.cfg')
    return _path


@pytest.fixture
def make_scenario():
    """Built scenario of a given kind with field overrides on top of the defaults."""
    def _make(kind: str, **overrides):
        return build_scenario(ScenarioConfig.defaults(kind).with_overrides(**overrides))
    return _make


@pytest.fixture
def ex1(make_scenario):
    return make_scenario('ex1')


@pytest.fixture
def ex2(make_scenario):
    return make_scenario('ex2')


@pytest.fixture
def ex3(make_scenario):
    return make_scenario('ex3')


@pytest.fixture
def ex4(make_scenario):
    return make_scenario('ex4')


@pytest.fixture
def ex5(make_scenario):
    return make_scenario('ex5')


@pytest.fixture
def ex1_click():
    """Ex1 click at radius 27 on T = 30: emission delay 3."""
    click = DetectionEvent(30.0, (27.0, 0.0, 0.0))
    return DetectionRecord(30.0, (click,), branch='decay')


@pytest.fixture
def ex2_minus_click(ex2):
    """Ex2 click emitted from r_minus along +x, delay 3."""
    r_minus = np.asarray(ex2.sites['atom_minus'].position)
    click = DetectionEvent(30.0, tuple(r_minus + np.array([27.0, 0.0, 0.0])))
    return DetectionRecord(30.0, (click,), branch='minus')


def exponential_quantiles(n: int, rate: float = 1.0) -> np.ndarray:
    """Midpoint quantiles of Exp(rate): a sample whose KS distance is exactly 1/(2n)."""
    q = (np.arange(n) + 0.5) / n
    return -np.log1p(-q) / rate


def sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)
