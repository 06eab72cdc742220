"""Qualitative dynamics: per-tick state estimation and trend classification.

The estimator answers "what is the parameter doing right now" from the
previous qualitative state and two consecutive values; the classifier
answers the retrospective questions (monotone? turning points? bounded?
inflexion? cyclic?) over a whole observation window. A parallel profile
lays per-tick states for several parameters on one tick grid so that
classification rules can read a full system snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Mapping, Sequence

from .errors import IncomparableValuesError, StatedevError


class SeriesTooShortError(StatedevError):
    """Operation needs more observations than the series holds."""


class EmptyOverlapError(StatedevError):
    """A series has no tick inside the requested interval."""

    def __init__(self, parameter: str):
        super().__init__(f"series for parameter {parameter!r} does not overlap the interval")
        self.parameter = parameter


class DynamicsKind(Enum):
    """Qualitative state vocabulary; declaration order is the ordinal order."""

    GROWTH = "Growth"
    DECLINE = "Decline"
    STEADY = "Steady"
    TURN_MAX = "TurnMax"
    TURN_MIN = "TurnMin"
    CYCLE_SUSPECT = "CycleSuspect"
    UNKNOWN = "Unknown"


VOCABULARY: tuple[str, ...] = tuple(kind.value for kind in DynamicsKind)

_BY_SYMBOL = {kind.value: kind for kind in DynamicsKind}


def kind_from_symbol(symbol: str) -> DynamicsKind:
    try:
        return _BY_SYMBOL[symbol]
    except KeyError:
        raise ValueError(f"unknown dynamics symbol {symbol!r}") from None


@dataclass(frozen=True)
class DynamicsState:
    kind: DynamicsKind
    streak: int

    def __post_init__(self):
        if self.kind is DynamicsKind.UNKNOWN:
            if self.streak != 0:
                raise ValueError("Unknown carries streak 0")
        elif self.streak < 1:
            raise ValueError("streak must be >= 1")

    INITIAL: ClassVar["DynamicsState"]


DynamicsState.INITIAL = DynamicsState(DynamicsKind.UNKNOWN, 0)


def _direction(x_prev, x_curr, epsilon: float) -> int:
    """-1, 0, +1 with |delta| <= epsilon treated as no movement."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    try:
        if epsilon == 0:
            if x_curr > x_prev:
                return 1
            return -1 if x_curr < x_prev else 0
        delta = x_curr - x_prev
    except TypeError:
        raise IncomparableValuesError(
            f"cannot compare {x_prev!r} with {x_curr!r}"
        ) from None
    if delta > epsilon:
        return 1
    return -1 if delta < -epsilon else 0


def estimate_state(
    prev: DynamicsState, x_prev, x_curr, epsilon: float = 0.0
) -> DynamicsState:
    """One estimation step: new qualitative state from the previous one
    and two consecutive values. Pure function of its four inputs.

    Movement within epsilon is Steady. A rise after a decline (or right
    after a peak) is TurnMin; symmetric for TurnMax. Rises and falls
    otherwise extend or start Growth/Decline streaks.
    """
    d = _direction(x_prev, x_curr, epsilon)
    if d == 0:
        streak = prev.streak + 1 if prev.kind is DynamicsKind.STEADY else 1
        return DynamicsState(DynamicsKind.STEADY, streak)
    if d > 0:
        if prev.kind is DynamicsKind.GROWTH:
            return DynamicsState(DynamicsKind.GROWTH, prev.streak + 1)
        if prev.kind in (DynamicsKind.DECLINE, DynamicsKind.TURN_MAX):
            return DynamicsState(DynamicsKind.TURN_MIN, 1)
        return DynamicsState(DynamicsKind.GROWTH, 1)
    if prev.kind is DynamicsKind.DECLINE:
        return DynamicsState(DynamicsKind.DECLINE, prev.streak + 1)
    if prev.kind in (DynamicsKind.GROWTH, DynamicsKind.TURN_MIN):
        return DynamicsState(DynamicsKind.TURN_MAX, 1)
    return DynamicsState(DynamicsKind.DECLINE, 1)


def fold_states(values: Sequence, epsilon: float = 0.0) -> tuple[DynamicsState, ...]:
    """States after each observation; the first is always the initial Unknown."""
    if not values:
        return ()
    out = [DynamicsState.INITIAL]
    for i in range(1, len(values)):
        out.append(estimate_state(out[-1], values[i - 1], values[i], epsilon))
    return tuple(out)


@dataclass(frozen=True)
class ParameterSeries:
    """Observations of one parameter on an integer tick grid."""

    parameter: str
    ticks: tuple[int, ...]
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "ticks", tuple(int(t) for t in self.ticks))
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.ticks) != len(self.values):
            raise ValueError("ticks and values differ in length")
        if not self.ticks:
            raise ValueError("series must hold at least one observation")
        if any(b <= a for a, b in zip(self.ticks, self.ticks[1:])):
            raise ValueError("ticks must be strictly increasing")

    @classmethod
    def from_ordinal(
        cls, parameter: str, ticks: Sequence[int], levels: Sequence[str], order: Sequence[str]
    ) -> "ParameterSeries":
        """Build a rank-valued series from ordinal observations."""
        order = list(order)
        ranks = []
        for level in levels:
            if level not in order:
                raise ValueError(f"level {level!r} not in declared order")
            ranks.append(float(order.index(level)))
        return cls(parameter, tuple(ticks), tuple(ranks))


@dataclass(frozen=True)
class TrendClass:
    """Answers to the standard trend questions over one window."""

    monotone: str  # "increasing" | "decreasing" | "none"
    critical_points: tuple[int, ...]  # value indices where direction reverses
    inflexions: tuple[int, ...]  # value indices where curvature changes sign
    bounds: tuple  # observed (min, max)
    cyclic_period: int | None
    forecast: DynamicsKind  # one-step-ahead qualitative forecast


def _within(a, b, epsilon: float) -> bool:
    if epsilon == 0:
        return a == b
    return abs(a - b) <= epsilon


def classify_series(series: ParameterSeries, epsilon: float = 0.0) -> TrendClass:
    """Retrospective trend classification of one series.

    Needs at least 2 observations; inflexion and cycle search engage
    from 3. Cycle search looks for the minimal period p in [2, n//2]
    with every value epsilon-equal to its p-back counterpart; a series
    with no strict movement is reported as not cyclic.
    """
    values = series.values
    n = len(values)
    if n < 2:
        raise SeriesTooShortError("classification needs at least 2 observations")
    signs = [_direction(values[i], values[i + 1], epsilon) for i in range(n - 1)]

    nonzero = [(i, s) for i, s in enumerate(signs) if s != 0]
    if not nonzero:
        monotone = "none"
    elif all(s >= 0 for s in signs):
        monotone = "increasing"
    elif all(s <= 0 for s in signs):
        monotone = "decreasing"
    else:
        monotone = "none"

    criticals = []
    for (_, prev_sign), (j, sign) in zip(nonzero, nonzero[1:]):
        if sign != prev_sign:
            criticals.append(j)  # value index of the extremum

    inflexions: list[int] = []
    if n >= 3:
        try:
            second = [values[i + 2] - 2 * values[i + 1] + values[i] for i in range(n - 2)]
        except TypeError:
            second = None
        if second is not None:
            curve = []
            for i, dd in enumerate(second):
                if dd > epsilon:
                    curve.append((i, 1))
                elif dd < -epsilon:
                    curve.append((i, -1))
            for (_, prev_sign), (j, sign) in zip(curve, curve[1:]):
                if sign != prev_sign:
                    inflexions.append(j + 1)

    cyclic_period = None
    if nonzero and n >= 3:
        for p in range(2, n // 2 + 1):
            if all(_within(values[t], values[t - p], epsilon) for t in range(p, n)):
                cyclic_period = p
                break

    return TrendClass(
        monotone=monotone,
        critical_points=tuple(criticals),
        inflexions=tuple(inflexions),
        bounds=(min(values), max(values)),
        cyclic_period=cyclic_period,
        forecast=fold_states(values, epsilon)[-1].kind,
    )


def current_symbol(series: ParameterSeries, epsilon: float = 0.0) -> DynamicsKind:
    """Current dynamics symbol for rule matrices: CycleSuspect when the
    window reads as cyclic, else the latest estimator state."""
    trend = classify_series(series, epsilon)
    if trend.cyclic_period is not None:
        return DynamicsKind.CYCLE_SUSPECT
    return trend.forecast


@dataclass(frozen=True)
class ParallelProfile:
    """Per-tick dynamics states of several parameters on one grid."""

    parameters: tuple[str, ...]
    start: int
    end: int
    rows: Mapping[str, tuple[DynamicsState, ...]]

    def cell(self, parameter: str, tick: int) -> DynamicsState:
        if not self.start <= tick <= self.end:
            raise KeyError(f"tick {tick} outside profile interval")
        return self.rows[parameter][tick - self.start]


def parallel_profile(
    series_set: Sequence[ParameterSeries],
    interval: tuple[int, int],
    epsilon: float = 0.0,
) -> ParallelProfile:
    """Lay the estimator states of every series on the tick grid [a, b].

    A grid tick carries the fold state over all of that series' values
    up to and including it; ticks the series never observed are Unknown.
    Every series must overlap the interval.
    """
    a, b = int(interval[0]), int(interval[1])
    if a > b:
        raise ValueError("interval start exceeds its end")
    names = [s.parameter for s in series_set]
    if len(set(names)) != len(names):
        raise ValueError("duplicate parameter in series set")
    rows: dict[str, tuple[DynamicsState, ...]] = {}
    for series in series_set:
        if not any(a <= t <= b for t in series.ticks):
            raise EmptyOverlapError(series.parameter)
        folded = fold_states(series.values, epsilon)
        by_tick = dict(zip(series.ticks, folded))
        rows[series.parameter] = tuple(
            by_tick.get(t, DynamicsState.INITIAL) for t in range(a, b + 1)
        )
    return ParallelProfile(parameters=tuple(names), start=a, end=b, rows=rows)
