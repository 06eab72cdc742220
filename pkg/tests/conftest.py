"""Shared fixtures: paths to the shipped model files and small builders."""

from pathlib import Path

import pytest

from statedev.canonical import Arc, ArcKind, CanonicalDiagram
from statedev.modelfile import parse_model

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

TWO_LEVEL = FIXTURES / "two_level.json"
BASIC = FIXTURES / "basic.json"
X_SERIES = FIXTURES / "x_series.csv"
DEV3_EVENTS = FIXTURES / "dev3_events.csv"


def chain(n: int, delta: int = 1, horizon: int = 0, back: bool = False) -> CanonicalDiagram:
    """n-state development chain s1 -> s2 -> ... -> sn, optional full backsteps."""
    states = tuple(f"s{i}" for i in range(1, n + 1))
    dev = tuple(Arc(states[i], states[i + 1], delta, ArcKind.DEV) for i in range(n - 1))
    backs = ()
    if back:
        backs = tuple(Arc(states[i + 1], states[i], delta, ArcKind.BACK) for i in range(n - 1))
    return CanonicalDiagram(
        id=f"chain{n}",
        states=states,
        dev_arcs=dev,
        back_arcs=backs,
        initial=states[0],
        final=states[-1],
        horizon=horizon or delta * (n - 1) + 2,
    )


@pytest.fixture(scope="session")
def basic_model():
    return parse_model(BASIC)


@pytest.fixture(scope="session")
def two_level_model():
    return parse_model(TWO_LEVEL)
