"""Canonical development diagrams: ordered states, timed arcs, object
distributions, and counter-based intensity analysis.

A diagram is a set of states totally ordered by its scale, development
arcs that climb the order and backstep arcs that fall, each carrying a
minimum residence delay expressed in ticks. Objects move along arcs one
transition at a time; the module enforces legality (right source state,
delay respected, inside the horizon) and counts every move per arc so
development and degradation intensity can be read back out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .errors import StatedevError


class ArcKind(Enum):
    DEV = "dev"
    BACK = "back"


class UnknownArcError(StatedevError):
    pass


class ObjectNotInFromStateError(StatedevError):
    pass


class TooEarlyError(StatedevError):
    pass


class BeyondHorizonError(StatedevError):
    pass


class WindowOutOfRangeError(StatedevError):
    pass


@dataclass(frozen=True)
class Arc:
    src: str
    dst: str
    delta: int
    kind: ArcKind = ArcKind.DEV

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("arc delta must be >= 0")

    @property
    def sort_index(self) -> tuple:
        return (self.src, self.dst, self.delta, self.kind.value)


@dataclass(frozen=True)
class CanonicalDiagram:
    """Development diagram over the tick grid [0, horizon].

    The state list order is the scale order; scale_id names the scale
    that induced it when the diagram was authored against one. Arcs may
    violate the order discipline at construction time; validate_canonical
    reports rather than refuses, so broken models stay inspectable.
    """

    id: str
    states: tuple[str, ...]
    dev_arcs: tuple[Arc, ...]
    back_arcs: tuple[Arc, ...]
    initial: str
    final: str
    horizon: int
    scale_id: str | None = None
    labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(
            self, "dev_arcs", tuple(sorted(self.dev_arcs, key=lambda a: a.sort_index))
        )
        object.__setattr__(
            self, "back_arcs", tuple(sorted(self.back_arcs, key=lambda a: a.sort_index))
        )
        object.__setattr__(self, "labels", dict(self.labels))
        if not self.states:
            raise ValueError(f"diagram {self.id!r} has no states")
        if len(set(self.states)) != len(self.states):
            raise ValueError(f"diagram {self.id!r} has duplicate states")
        if self.horizon < 0:
            raise ValueError(f"diagram {self.id!r} has negative horizon")
        known = set(self.states)
        for name, value in (("initial", self.initial), ("final", self.final)):
            if value not in known:
                raise ValueError(f"diagram {self.id!r}: {name} state {value!r} unknown")
        for arc in self.dev_arcs:
            if arc.kind is not ArcKind.DEV:
                raise ValueError(f"diagram {self.id!r}: back arc listed under dev_arcs")
        for arc in self.back_arcs:
            if arc.kind is not ArcKind.BACK:
                raise ValueError(f"diagram {self.id!r}: dev arc listed under back_arcs")
        for arc in self.arcs:
            if arc.src not in known or arc.dst not in known:
                raise ValueError(
                    f"diagram {self.id!r}: arc {arc.src}->{arc.dst} references unknown state"
                )

    @property
    def arcs(self) -> tuple[Arc, ...]:
        return self.dev_arcs + self.back_arcs

    def order(self, state: str) -> int:
        return self.states.index(state)

    def out_arcs(self, state: str) -> tuple[Arc, ...]:
        return tuple(a for a in self.arcs if a.src == state)


@dataclass(frozen=True)
class DiagramReport:
    """validate_canonical outcome; report-valued, never raises."""

    diagram_id: str
    order_violations: tuple[Arc, ...]
    delta_violations: tuple[Arc, ...]
    unreachable: tuple[str, ...]  # no dev-arc path from the initial state
    final_reachable: bool

    @property
    def passed(self) -> bool:
        return (
            not self.order_violations
            and not self.delta_violations
            and not self.unreachable
            and self.final_reachable
        )


def validate_canonical(d: CanonicalDiagram) -> DiagramReport:
    """Check the order discipline, delta ranges, and dev-arc reachability."""
    order_violations = []
    for arc in d.dev_arcs:
        if d.order(arc.src) >= d.order(arc.dst):
            order_violations.append(arc)
    for arc in d.back_arcs:
        if d.order(arc.dst) >= d.order(arc.src):
            order_violations.append(arc)
    delta_violations = [a for a in d.arcs if not 0 <= a.delta <= d.horizon]
    reached = {d.initial}
    frontier = [d.initial]
    while frontier:
        here = frontier.pop()
        for arc in d.dev_arcs:
            if arc.src == here and arc.dst not in reached:
                reached.add(arc.dst)
                frontier.append(arc.dst)
    unreachable = tuple(s for s in d.states if s not in reached)
    return DiagramReport(
        diagram_id=d.id,
        order_violations=tuple(order_violations),
        delta_violations=tuple(delta_violations),
        unreachable=unreachable,
        final_reachable=d.final in reached,
    )


@dataclass(frozen=True)
class ObjectDistribution:
    """Objects placed on states, each with its entry tick."""

    assignment: Mapping[str, tuple[str, int]]

    def __post_init__(self):
        object.__setattr__(
            self,
            "assignment",
            {obj: (state, int(entry)) for obj, (state, entry) in self.assignment.items()},
        )

    @classmethod
    def initial(cls, placement: Mapping[str, str], tick: int = 0) -> "ObjectDistribution":
        return cls({obj: (state, tick) for obj, state in placement.items()})

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for state, _ in self.assignment.values():
            out[state] = out.get(state, 0) + 1
        return out

    def __len__(self) -> int:
        return len(self.assignment)


@dataclass(frozen=True)
class ArcCounters:
    counts: Mapping[Arc, int]
    history: tuple[tuple[int, Arc], ...]

    @classmethod
    def empty(cls) -> "ArcCounters":
        return cls(counts={}, history=())

    def record(self, arc: Arc, tick: int) -> "ArcCounters":
        counts = dict(self.counts)
        counts[arc] = counts.get(arc, 0) + 1
        return ArcCounters(counts=counts, history=self.history + ((tick, arc),))

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class TransitionEvent:
    object: str
    arc: Arc
    tick: int


def apply_transition(
    dist: ObjectDistribution,
    counters: ArcCounters,
    d: CanonicalDiagram,
    obj: str,
    arc: Arc,
    tick: int,
) -> tuple[ObjectDistribution, ArcCounters, TransitionEvent]:
    """Move one object along one arc at one tick, functionally.

    Legal when the arc belongs to the diagram, the object sits in the
    arc's source, the residence delay has elapsed, and the tick is on
    the grid. Returns the new distribution, counters, and the event.
    """
    if arc not in d.dev_arcs and arc not in d.back_arcs:
        raise UnknownArcError(f"arc {arc.src}->{arc.dst} not in diagram {d.id!r}")
    if not 0 <= tick <= d.horizon:
        raise BeyondHorizonError(f"tick {tick} outside [0, {d.horizon}]")
    entry = dist.assignment.get(obj)
    if entry is None or entry[0] != arc.src:
        where = "nowhere" if entry is None else f"in {entry[0]!r}"
        raise ObjectNotInFromStateError(
            f"object {obj!r} is {where}, arc starts at {arc.src!r}"
        )
    if tick < entry[1] + arc.delta:
        raise TooEarlyError(
            f"object {obj!r} entered {arc.src!r} at {entry[1]}, "
            f"arc delay {arc.delta} blocks firing before {entry[1] + arc.delta}"
        )
    assignment = dict(dist.assignment)
    assignment[obj] = (arc.dst, tick)
    return (
        ObjectDistribution(assignment),
        counters.record(arc, tick),
        TransitionEvent(object=obj, arc=arc, tick=tick),
    )


def replay_script(
    d: CanonicalDiagram,
    initial: ObjectDistribution,
    script: Sequence[tuple[str, Arc, int]],
) -> tuple[ObjectDistribution, ArcCounters, tuple[TransitionEvent, ...]]:
    """Apply a scripted transition list in order, enforcing legality.

    Script ticks must be non-decreasing; each entry is (object, arc, tick).
    """
    dist = initial
    counters = ArcCounters.empty()
    events = []
    last_tick = None
    for obj, arc, tick in script:
        if last_tick is not None and tick < last_tick:
            raise ValueError(f"script ticks go backwards at tick {tick}")
        last_tick = tick
        dist, counters, event = apply_transition(dist, counters, d, obj, arc, tick)
        events.append(event)
    return dist, counters, tuple(events)


@dataclass(frozen=True)
class IntensityReport:
    """Development/degradation intensity over a tick window."""

    diagram_id: str
    window: tuple[int, int]
    occupancy: Mapping[str, tuple[int, ...]]  # N_i(t) per state over the window
    arc_cumulative: Mapping[Arc, tuple[int, ...]]  # eta_ij(t), cumulative from 0
    development: int  # dev-arc events inside the window
    degradation: int  # back-arc events inside the window
    ratio: float | None  # development / degradation, None when degradation is 0
    reached: Mapping[str, int]  # occupancy at the window's end
    target_delta: Mapping[str, int] | None  # reached minus target, when a target is given


def intensity_report(
    history: Sequence[TransitionEvent],
    d: CanonicalDiagram,
    window: tuple[int, int],
    initial: ObjectDistribution,
    target: Mapping[str, int] | None = None,
) -> IntensityReport:
    """Reconstruct N_i(t) and cumulative arc counters over a window.

    The target, when given, is a goal distribution (state -> object
    count); the report annotates the difference, it never enforces it.
    """
    t_lo, t_hi = int(window[0]), int(window[1])
    if t_lo > t_hi or t_lo < 0 or t_hi > d.horizon:
        raise WindowOutOfRangeError(f"window [{t_lo}, {t_hi}] outside [0, {d.horizon}]")
    arcs = set(d.arcs)
    for ev in history:
        if not 0 <= ev.tick <= d.horizon:
            raise ValueError(f"event at tick {ev.tick} outside the diagram horizon")
        if ev.arc not in arcs:
            raise ValueError(f"event arc {ev.arc.src}->{ev.arc.dst} not in diagram {d.id!r}")

    by_tick: dict[int, list[TransitionEvent]] = {}
    for ev in history:
        by_tick.setdefault(ev.tick, []).append(ev)

    counts = {state: 0 for state in d.states}
    for state, n in initial.counts().items():
        if state not in counts:
            raise ValueError(f"initial distribution places objects on unknown state {state!r}")
        counts[state] = n
    cumulative = {arc: 0 for arc in d.arcs}
    occupancy: dict[str, list[int]] = {state: [] for state in d.states}
    arc_series: dict[Arc, list[int]] = {arc: [] for arc in d.arcs}
    development = degradation = 0

    for t in range(0, t_hi + 1):
        for ev in by_tick.get(t, ()):
            counts[ev.arc.src] -= 1
            counts[ev.arc.dst] += 1
            cumulative[ev.arc] += 1
            if t_lo <= t:
                if ev.arc.kind is ArcKind.DEV:
                    development += 1
                else:
                    degradation += 1
        if t >= t_lo:
            for state in d.states:
                occupancy[state].append(counts[state])
            for arc in d.arcs:
                arc_series[arc].append(cumulative[arc])

    reached = {state: counts[state] for state in d.states}
    target_delta = None
    if target is not None:
        target_delta = {
            state: reached[state] - int(target.get(state, 0)) for state in d.states
        }
    return IntensityReport(
        diagram_id=d.id,
        window=(t_lo, t_hi),
        occupancy={s: tuple(v) for s, v in occupancy.items()},
        arc_cumulative={a: tuple(v) for a, v in arc_series.items()},
        development=development,
        degradation=degradation,
        ratio=(development / degradation) if degradation else None,
        reached=reached,
        target_delta=target_delta,
    )
