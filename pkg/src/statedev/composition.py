"""Diagram composition and consistency against prescribed sequences.

Three constructions: sequential chaining over strictly increasing
intervals, parallel interleaving product over one shared interval, and
generalization of selected child-state tuples into a parent diagram via
a supplied strict partial order. Consistency asks whether a timed set
of diagrams can visit prescribed (diagram, state) entries in list order
by their deadlines; check_consistency answers by breadth-first search
over the joint configuration space, and enumerate_attainable_sequences
is the deliberately dumb ground-truth oracle that enumerates every
legal execution outright.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .canonical import Arc, ArcKind, CanonicalDiagram
from .errors import StatedevError


class IntervalOrderViolationError(StatedevError):
    pass


class IntervalMismatchError(StatedevError):
    pass


class TupleOutOfProductError(StatedevError):
    pass


class OrderCycleError(StatedevError):
    pass


class NoUniqueExtremesError(StatedevError):
    pass


class UnknownDiagramError(StatedevError):
    pass


class UnknownStateError(StatedevError):
    pass


class SpaceBoundExceededError(StatedevError):
    pass


@dataclass(frozen=True)
class TimedDiagramSet:
    """Diagrams each considered over its own interval [0, tau]."""

    diagrams: tuple[CanonicalDiagram, ...]
    intervals: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "diagrams", tuple(self.diagrams))
        object.__setattr__(self, "intervals", tuple(int(t) for t in self.intervals))
        if len(self.diagrams) != len(self.intervals):
            raise ValueError("one interval per diagram required")
        for d, tau in zip(self.diagrams, self.intervals):
            if tau < 0:
                raise ValueError(f"interval for {d.id!r} is negative")
            if tau > d.horizon:
                raise ValueError(
                    f"interval {tau} for {d.id!r} exceeds its horizon {d.horizon}"
                )


@dataclass(frozen=True)
class PrescribedEntry:
    diagram: int
    state: str
    deadline: int


@dataclass(frozen=True)
class PrescribedSequence:
    entries: tuple[PrescribedEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for e in self.entries:
            if e.deadline < 0:
                raise ValueError("deadlines must be >= 0")
        for a, b in zip(self.entries, self.entries[1:]):
            if b.deadline < a.deadline:
                raise ValueError("deadlines must be non-decreasing along the list")


@dataclass(frozen=True)
class OrderRelationSpec:
    """Strict order pairs (a before b) over selected child-state tuples."""

    pairs: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]

    def __post_init__(self):
        norm = tuple(
            (tuple(a), tuple(b)) for a, b in self.pairs
        )
        object.__setattr__(self, "pairs", norm)


def compose_sequential(dset: TimedDiagramSet) -> CanonicalDiagram:
    """Chain the diagrams along strictly increasing intervals.

    States keep their relative order, every diagram's states preceding
    the next one's; a linking dev arc runs from each final state to the
    next initial state with delta equal to the interval gap. A single
    diagram comes back unchanged.
    """
    diagrams, taus = dset.diagrams, dset.intervals
    if not diagrams:
        raise ValueError("nothing to compose")
    for i, (a, b) in enumerate(zip(taus, taus[1:])):
        if b <= a:
            raise IntervalOrderViolationError(
                f"intervals must strictly increase; tau[{i}]={a} vs tau[{i + 1}]={b}"
            )
    if len(diagrams) == 1:
        return diagrams[0]

    def rename(i: int, state: str) -> str:
        return f"{i}.{state}"

    states: list[str] = []
    labels: dict[str, str] = {}
    dev: list[Arc] = []
    back: list[Arc] = []
    for i, d in enumerate(diagrams):
        for s in d.states:
            states.append(rename(i, s))
            labels[rename(i, s)] = f"{d.id}:{s}"
        for arc in d.dev_arcs:
            dev.append(Arc(rename(i, arc.src), rename(i, arc.dst), arc.delta, ArcKind.DEV))
        for arc in d.back_arcs:
            back.append(Arc(rename(i, arc.src), rename(i, arc.dst), arc.delta, ArcKind.BACK))
    for i in range(len(diagrams) - 1):
        dev.append(
            Arc(
                rename(i, diagrams[i].final),
                rename(i + 1, diagrams[i + 1].initial),
                taus[i + 1] - taus[i],
                ArcKind.DEV,
            )
        )
    return CanonicalDiagram(
        id="seq(" + ",".join(d.id for d in diagrams) + ")",
        states=tuple(states),
        dev_arcs=tuple(dev),
        back_arcs=tuple(back),
        initial=rename(0, diagrams[0].initial),
        final=rename(len(diagrams) - 1, diagrams[-1].final),
        horizon=taus[-1],
        labels=labels,
    )


def _tuple_id(parts: Sequence[str]) -> str:
    return "(" + ",".join(parts) + ")"


@dataclass(frozen=True)
class ParallelFragment:
    """Interleaving product: .diagram holds the tuple-state diagram,
    tuples maps composite ids back to component states, arc_origin maps
    every composite arc to (component index, component arc)."""

    diagram: CanonicalDiagram
    components: tuple[CanonicalDiagram, ...]
    tuples: dict[str, tuple[str, ...]]
    arc_origin: dict[Arc, tuple[int, Arc]]


def compose_parallel(dset: TimedDiagramSet) -> ParallelFragment:
    """Product over one shared interval; each arc moves one component."""
    diagrams, taus = dset.diagrams, dset.intervals
    if not diagrams:
        raise ValueError("nothing to compose")
    if len(set(taus)) > 1:
        raise IntervalMismatchError(f"intervals differ: {list(taus)}")
    tau = taus[0]
    combos = list(itertools.product(*(d.states for d in diagrams)))
    tuples = {_tuple_id(c): tuple(c) for c in combos}
    states = tuple(_tuple_id(c) for c in combos)
    dev: list[Arc] = []
    back: list[Arc] = []
    origin: dict[Arc, tuple[int, Arc]] = {}
    for i, d in enumerate(diagrams):
        for arc in d.arcs:
            for combo in itertools.product(
                *(x.states if j != i else (None,) for j, x in enumerate(diagrams))
            ):
                src = list(combo)
                dst = list(combo)
                src[i] = arc.src
                dst[i] = arc.dst
                new = Arc(_tuple_id(src), _tuple_id(dst), arc.delta, arc.kind)
                (dev if arc.kind is ArcKind.DEV else back).append(new)
                origin[new] = (i, arc)
    return ParallelFragment(
        diagram=CanonicalDiagram(
            id="par(" + ",".join(d.id for d in diagrams) + ")",
            states=states,
            dev_arcs=tuple(dev),
            back_arcs=tuple(back),
            initial=_tuple_id([d.initial for d in diagrams]),
            final=_tuple_id([d.final for d in diagrams]),
            horizon=tau,
        ),
        components=diagrams,
        tuples=tuples,
        arc_origin=origin,
    )


@dataclass(frozen=True)
class GeneralizedDiagram:
    """Parent-level diagram from generalize; tuple_of recovers the
    child-state tuple behind each parent state id."""

    diagram: CanonicalDiagram
    tuple_of: dict[str, tuple[str, ...]]


def generalize(
    children: TimedDiagramSet,
    selection: Iterable[Sequence[str]],
    order: OrderRelationSpec,
) -> GeneralizedDiagram:
    """Lift selected child-state tuples to a parent diagram.

    The supplied pairs must form a strict partial order on the selection
    with one minimal and one maximal element; parent states follow the
    deterministic linear extension (ties broken by child state orders),
    parent dev arcs are the covering pairs.
    """
    diagrams = children.diagrams
    chosen: list[tuple[str, ...]] = []
    for tup in selection:
        tup = tuple(tup)
        if len(tup) != len(diagrams):
            raise TupleOutOfProductError(
                f"tuple {tup} has {len(tup)} parts, expected {len(diagrams)}"
            )
        for d, s in zip(diagrams, tup):
            if s not in d.states:
                raise TupleOutOfProductError(f"state {s!r} not in diagram {d.id!r}")
        if tup not in chosen:
            chosen.append(tup)
    if not chosen:
        raise ValueError("selection is empty")
    index = {tup: i for i, tup in enumerate(chosen)}
    n = len(chosen)
    edge = [[False] * n for _ in range(n)]
    for a, b in order.pairs:
        if a not in index or b not in index:
            missing = a if a not in index else b
            raise TupleOutOfProductError(f"order pair references unselected tuple {missing}")
        if a == b:
            raise OrderCycleError(f"reflexive order pair on {a}")
        edge[index[a]][index[b]] = True
    # Warshall closure; a cycle shows up as a reflexive closure edge.
    for k in range(n):
        for i in range(n):
            if edge[i][k]:
                row_k = edge[k]
                row_i = edge[i]
                for j in range(n):
                    if row_k[j]:
                        row_i[j] = True
    for i in range(n):
        if edge[i][i]:
            raise OrderCycleError(f"order cycles through {chosen[i]}")
    minimal = [i for i in range(n) if not any(edge[j][i] for j in range(n))]
    maximal = [i for i in range(n) if not any(edge[i][j] for j in range(n))]
    if len(minimal) != 1 or len(maximal) != 1:
        raise NoUniqueExtremesError(
            f"{len(minimal)} minimal and {len(maximal)} maximal tuples; need exactly one of each"
        )

    def tie_key(i: int) -> tuple[int, ...]:
        return tuple(d.order(s) for d, s in zip(diagrams, chosen[i]))

    remaining = set(range(n))
    extension: list[int] = []
    while remaining:
        ready = [i for i in remaining if not any(edge[j][i] for j in remaining if j != i)]
        nxt = min(ready, key=tie_key)
        extension.append(nxt)
        remaining.discard(nxt)

    covering: list[tuple[int, int]] = []
    for i in range(n):
        for j in range(n):
            if edge[i][j] and not any(edge[i][k] and edge[k][j] for k in range(n)):
                covering.append((i, j))

    ids = [_tuple_id(chosen[i]) for i in range(n)]
    states = tuple(ids[i] for i in extension)
    dev = tuple(Arc(ids[i], ids[j], 0, ArcKind.DEV) for i, j in covering)
    diagram = CanonicalDiagram(
        id="gen(" + ",".join(d.id for d in diagrams) + ")",
        states=states,
        dev_arcs=dev,
        back_arcs=(),
        initial=ids[minimal[0]],
        final=ids[maximal[0]],
        horizon=max(children.intervals),
    )
    return GeneralizedDiagram(
        diagram=diagram, tuple_of={ids[i]: chosen[i] for i in range(n)}
    )


@dataclass(frozen=True)
class ScheduledFiring:
    tick: int
    diagram: int
    arc: Arc


@dataclass(frozen=True)
class ConsistencyVerdict:
    consistent: bool
    witness: tuple[ScheduledFiring, ...] | None
    satisfied_at: tuple[int, ...] | None
    failed_prefix: int | None  # entry count of the shortest unsatisfiable prefix


def _sorted_arcs(d: CanonicalDiagram) -> tuple[Arc, ...]:
    return tuple(
        sorted(d.arcs, key=lambda a: (d.order(a.src), d.order(a.dst), a.delta, a.kind.value))
    )


def _validate_refs(dset: TimedDiagramSet, seq: PrescribedSequence) -> None:
    for e in seq.entries:
        if not 0 <= e.diagram < len(dset.diagrams):
            raise UnknownDiagramError(f"no diagram at index {e.diagram}")
        if e.state not in dset.diagrams[e.diagram].states:
            raise UnknownStateError(
                f"state {e.state!r} not in diagram {dset.diagrams[e.diagram].id!r}"
            )


def check_consistency(dset: TimedDiagramSet, seq: PrescribedSequence) -> ConsistencyVerdict:
    """Decide ordered visitation by deadlines over the joint tick grid.

    Breadth-first search over (per-diagram state, per-diagram entry
    tick, satisfied-prefix length), tick by tick; within one tick any
    number of diagrams may fire and a diagram may chain zero-delay
    arcs. Witnesses are earliest-firing with lowest diagram index, then
    lowest arc order as tie-break.
    """
    _validate_refs(dset, seq)
    entries = seq.entries
    if not entries:
        return ConsistencyVerdict(True, (), (), None)
    horizon = entries[-1].deadline
    n = len(dset.diagrams)
    limits = [min(tau, horizon) for tau in dset.intervals]
    arc_lists = [_sorted_arcs(d) for d in dset.diagrams]

    def claim(states: tuple[str, ...], k: int, tick: int) -> int:
        while (
            k < len(entries)
            and entries[k].deadline >= tick
            and states[entries[k].diagram] == entries[k].state
        ):
            k += 1
        return k

    init = (
        tuple(d.initial for d in dset.diagrams),
        (0,) * n,
        0,
    )
    start_k = claim(init[0], 0, 0)
    init = (init[0], init[1], start_k)

    def finish(node, parents) -> ConsistencyVerdict:
        firings = []
        cur = node
        while parents[cur] is not None:
            prev, firing = parents[cur]
            firings.append(firing)
            cur = prev
        firings.reverse()
        # Recompute claim ticks along the witness.
        states = list(d.initial for d in dset.diagrams)
        ticks: list[int] = []
        k = 0
        while k < len(entries) and entries[k].deadline >= 0 and states[entries[k].diagram] == entries[k].state:
            ticks.append(0)
            k += 1
        for f in firings:
            states[f.diagram] = f.arc.dst
            while (
                k < len(entries)
                and entries[k].deadline >= f.tick
                and states[entries[k].diagram] == entries[k].state
            ):
                ticks.append(f.tick)
                k += 1
        return ConsistencyVerdict(True, tuple(firings), tuple(ticks), None)

    parents: dict = {init: None}
    if start_k == len(entries):
        return finish(init, parents)
    frontier = [init]
    best_k = start_k
    for t in range(0, horizon + 1):
        alive = [
            node
            for node in frontier
            if node[2] >= len(entries) or entries[node[2]].deadline >= t
        ]
        queue = list(alive)
        carried = set(alive)
        qi = 0
        while qi < len(queue):
            node = queue[qi]
            qi += 1
            states, entry_ticks, k = node
            for di in range(n):
                if t > limits[di]:
                    continue
                here = states[di]
                entered = entry_ticks[di]
                for arc in arc_lists[di]:
                    if arc.src != here or t < entered + arc.delta:
                        continue
                    ns = states[:di] + (arc.dst,) + states[di + 1 :]
                    ne = entry_ticks[:di] + (t,) + entry_ticks[di + 1 :]
                    nk = claim(ns, k, t)
                    if nk > best_k:
                        best_k = nk
                    new = (ns, ne, nk)
                    if new in parents:
                        continue
                    parents[new] = (node, ScheduledFiring(t, di, arc))
                    if nk == len(entries):
                        return finish(new, parents)
                    if entries[nk].deadline < t:
                        continue  # dead branch: its next entry already expired
                    queue.append(new)
                    carried.add(new)
        frontier = list(carried)
    return ConsistencyVerdict(False, None, None, best_k + 1)


def _diagram_executions(
    d: CanonicalDiagram, last_tick: int, bound: int, sink: list
) -> list[tuple[tuple[int, Arc], ...]]:
    """All legal single-token executions with firing ticks <= last_tick.

    Executions revisiting a state within one tick are skipped: they only
    oscillate without adding occupancy, and cannot occur at all when
    every cycle-closing arc carries a nonzero delay.
    """
    arcs = _sorted_arcs(d)
    out: list[tuple[tuple[int, Arc], ...]] = []

    def rec(state: str, entered: int, prefix: list, tick_seen: set, last_fire: int):
        out.append(tuple(prefix))
        if len(out) + len(sink) > bound:
            raise SpaceBoundExceededError(
                f"execution count exceeds the configured bound {bound}"
            )
        for arc in arcs:
            if arc.src != state:
                continue
            earliest = max(entered + arc.delta, last_fire)
            for t in range(earliest, last_tick + 1):
                if t == last_fire:
                    if arc.dst in tick_seen:
                        continue
                    seen = tick_seen | {arc.dst}
                else:
                    seen = {state, arc.dst}
                prefix.append((t, arc))
                rec(arc.dst, t, prefix, seen, t)
                prefix.pop()

    rec(d.initial, 0, [], {d.initial}, 0)
    return out


def enumerate_attainable_sequences(
    dset: TimedDiagramSet, horizon: int, bound: int = 200_000
) -> list[tuple[tuple[tuple[int, Arc], ...], ...]]:
    """Every legal joint execution up to the horizon, exhaustively.

    A joint execution is one execution per diagram (diagrams do not
    interact); the result is their cross product. Ground truth for
    check_consistency on small instances; SpaceBoundExceededError
    guards against explosion.
    """
    per_diagram = []
    sink: list = []
    for d, tau in zip(dset.diagrams, dset.intervals):
        execs = _diagram_executions(d, min(tau, horizon), bound, sink)
        sink.extend([None] * len(execs))
        per_diagram.append(execs)
    total = 1
    for execs in per_diagram:
        total *= len(execs)
        if total > bound:
            raise SpaceBoundExceededError(
                f"joint execution count exceeds the configured bound {bound}"
            )
    return [tuple(combo) for combo in itertools.product(*per_diagram)]


def _tick_orderings(groups: list[list]) -> Iterable[tuple]:
    """All merges of the per-diagram event lists preserving each list's order."""
    if all(not g for g in groups):
        yield ()
        return
    for i, g in enumerate(groups):
        if not g:
            continue
        head, rest = g[0], g[1:]
        shrunk = groups[:i] + [rest] + groups[i + 1 :]
        for tail in _tick_orderings(shrunk):
            yield (head,) + tail


def execution_satisfies(
    dset: TimedDiagramSet,
    joint: tuple[tuple[tuple[int, Arc], ...], ...],
    seq: PrescribedSequence,
) -> bool:
    """Whether some same-tick interleaving of the joint execution visits
    the prescribed entries in order by their deadlines."""
    entries = seq.entries
    if not entries:
        return True
    horizon = entries[-1].deadline
    n = len(dset.diagrams)
    per_tick: dict[int, list[list[tuple[int, Arc]]]] = {}
    for di, events in enumerate(joint):
        for tick, arc in events:
            if tick > horizon:
                break
            per_tick.setdefault(tick, [[] for _ in range(n)])[di].append((di, arc))

    def walk(ordering_by_tick: dict[int, tuple]) -> bool:
        states = [d.initial for d in dset.diagrams]
        k = 0
        for t in range(0, horizon + 1):
            while (
                k < len(entries)
                and entries[k].deadline >= t
                and states[entries[k].diagram] == entries[k].state
            ):
                k += 1
            if k == len(entries):
                return True
            if entries[k].deadline < t:
                return False
            for di, arc in ordering_by_tick.get(t, ()):
                states[di] = arc.dst
                while (
                    k < len(entries)
                    and entries[k].deadline >= t
                    and states[entries[k].diagram] == entries[k].state
                ):
                    k += 1
                if k == len(entries):
                    return True
        return k == len(entries)

    ticks = sorted(per_tick)
    option_lists = [list(_tick_orderings(per_tick[t])) for t in ticks]
    for combo in itertools.product(*option_lists):
        if walk({t: ordering for t, ordering in zip(ticks, combo)}):
            return True
    return False
