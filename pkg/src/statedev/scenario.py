"""Symbol-driven hierarchies: hypothesis diagrams, after-effect coupling,
deterministic scenario execution, and trajectory analysis.

A scenario wires one hypothesis diagram per subsystem of a rooted tree,
feeds them a time diagram of control symbols, and couples levels through
an after-effect scheme: general symbols fire coupled arcs that cascade
down parent-link tuples atomically, completed tuples fire their parent
arc upward, and prolonged silence triggers backstep arcs. Execution is
tick-deterministic; every state change is a logged event, and reports
are recounts of that log.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from .errors import StatedevError


class ValidationFailedError(StatedevError):
    def __init__(self, report: "ScenarioValidationReport"):
        self.report = report
        head = report.violations[0] if report.violations else "invalid scenario"
        more = len(report.violations) - 1
        super().__init__(head + (f" (+{more} more)" if more > 0 else ""))


class HorizonExceededError(StatedevError):
    pass


class TrajectoryScenarioMismatchError(StatedevError):
    pass


class MissingScoreError(StatedevError):
    pass


class IncomparableReportsError(StatedevError):
    pass


@dataclass(frozen=True)
class HypothesisDiagram:
    """States in development order; labeled arcs climb, back arcs drop."""

    id: str
    states: tuple[str, ...]
    initial: str
    final: str
    labeled_arcs: tuple[tuple[str, str, str], ...]  # (src, dst, symbol)
    back_arcs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(
            self, "labeled_arcs", tuple(tuple(a) for a in self.labeled_arcs)
        )
        object.__setattr__(self, "back_arcs", tuple(tuple(a) for a in self.back_arcs))
        if not self.states:
            raise ValueError(f"diagram {self.id!r} has no states")
        if len(set(self.states)) != len(self.states):
            raise ValueError(f"diagram {self.id!r} has duplicate states")
        for s in (self.initial, self.final):
            if s not in self.states:
                raise ValueError(f"{s!r} is not a state of diagram {self.id!r}")
        for src, dst, _ in self.labeled_arcs:
            if src not in self.states or dst not in self.states:
                raise ValueError(f"arc ({src},{dst}) leaves the states of {self.id!r}")
        for src, dst in self.back_arcs:
            if src not in self.states or dst not in self.states:
                raise ValueError(f"back arc ({src},{dst}) leaves the states of {self.id!r}")

    @property
    def alphabet(self) -> frozenset[str]:
        return frozenset(sym for _, _, sym in self.labeled_arcs)

    def order(self, state: str) -> int:
        return self.states.index(state)


@dataclass(frozen=True)
class ArcRef:
    """One labeled arc instance, pinned to its subsystem."""

    subsystem: str
    src: str
    dst: str
    symbol: str

    @property
    def sort_key(self) -> tuple[str, str, str, str]:
        return (self.subsystem, self.src, self.dst, self.symbol)


@dataclass(frozen=True)
class AfterEffectScheme:
    """Partition of labeled arcs into isolated and coupled, of symbols
    into individual and general, plus the parent-link tuples driving
    downward and upward propagation."""

    isolated: frozenset[ArcRef]
    coupled: frozenset[ArcRef]
    individual_symbols: frozenset[str]
    general_symbols: frozenset[str]
    parent_links: Mapping[ArcRef, tuple[ArcRef, ...]]
    upward_threshold: Union[int, str] = "all"

    def __post_init__(self):
        object.__setattr__(self, "isolated", frozenset(self.isolated))
        object.__setattr__(self, "coupled", frozenset(self.coupled))
        object.__setattr__(self, "individual_symbols", frozenset(self.individual_symbols))
        object.__setattr__(self, "general_symbols", frozenset(self.general_symbols))
        object.__setattr__(
            self,
            "parent_links",
            {k: tuple(v) for k, v in self.parent_links.items()},
        )

    def required_count(self, link: tuple[ArcRef, ...]) -> int:
        if self.upward_threshold == "all":
            return len(link)
        return int(self.upward_threshold)


@dataclass(frozen=True)
class HierarchicalStructure:
    """Rooted tree of subsystem ids."""

    root: str
    children: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(
            self, "children", {k: tuple(v) for k, v in self.children.items()}
        )
        seen: set[str] = set()
        order: list[str] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node in seen:
                raise ValueError(f"subsystem {node!r} appears twice in the hierarchy")
            seen.add(node)
            order.append(node)
            stack.extend(reversed(self.children.get(node, ())))
        for parent, kids in self.children.items():
            if parent not in seen:
                raise ValueError(f"children listed for unreachable subsystem {parent!r}")
            for kid in kids:
                if kid not in seen:
                    raise ValueError(f"subsystem {kid!r} is detached from the root")
        object.__setattr__(self, "_preorder", tuple(order))
        parent_of: dict[str, str] = {}
        for parent, kids in self.children.items():
            for kid in kids:
                parent_of[kid] = parent
        object.__setattr__(self, "_parent_of", parent_of)

    def preorder(self) -> tuple[str, ...]:
        return self._preorder  # type: ignore[attr-defined]

    def parent(self, subsystem: str) -> Union[str, None]:
        return self._parent_of.get(subsystem)  # type: ignore[attr-defined]

    def children_of(self, subsystem: str) -> tuple[str, ...]:
        return self.children.get(subsystem, ())


@dataclass(frozen=True)
class TimeDiagramEntry:
    tick: int
    target: Union[str, None]  # None broadcasts to every subsystem knowing the symbol
    symbol: str


@dataclass(frozen=True)
class Scenario:
    id: str
    diagrams: tuple[HypothesisDiagram, ...]
    hierarchy: HierarchicalStructure
    assignment: Mapping[str, str]  # subsystem id -> diagram id
    time_diagram: tuple[TimeDiagramEntry, ...]
    after_effect: AfterEffectScheme
    backstep_timeout: int = 1
    horizon: int = 0

    def __post_init__(self):
        object.__setattr__(self, "diagrams", tuple(self.diagrams))
        object.__setattr__(self, "assignment", dict(self.assignment))
        object.__setattr__(self, "time_diagram", tuple(self.time_diagram))
        by_id = {}
        for d in self.diagrams:
            if d.id in by_id:
                raise ValueError(f"duplicate diagram id {d.id!r}")
            by_id[d.id] = d
        object.__setattr__(self, "_by_id", by_id)

    def diagram_of(self, subsystem: str) -> HypothesisDiagram:
        return self._by_id[self.assignment[subsystem]]  # type: ignore[attr-defined]

    def subsystems(self) -> tuple[str, ...]:
        return self.hierarchy.preorder()


@dataclass(frozen=True)
class ScenarioValidationReport:
    scenario_id: str
    violations: tuple[str, ...]
    warnings: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_scenario(sc: Scenario) -> ScenarioValidationReport:
    """Check the full cross-structure wiring; report, never raise."""
    bad: list[str] = []
    warn: list[str] = []
    subs = sc.hierarchy.preorder()
    ids = {d.id for d in sc.diagrams}

    for sub in subs:
        if sub not in sc.assignment:
            bad.append(f"subsystem {sub!r} has no assigned diagram")
        elif sc.assignment[sub] not in ids:
            bad.append(f"subsystem {sub!r} is assigned unknown diagram {sc.assignment[sub]!r}")
    for sub in sc.assignment:
        if sub not in subs:
            bad.append(f"assignment names unknown subsystem {sub!r}")
    seen_diagram: dict[str, str] = {}
    for sub in subs:
        did = sc.assignment.get(sub)
        if did is None or did not in ids:
            continue
        if did in seen_diagram:
            bad.append(
                f"diagram {did!r} is assigned to both {seen_diagram[did]!r} and {sub!r}"
            )
        else:
            seen_diagram[did] = sub
    for d in sc.diagrams:
        if d.id not in seen_diagram:
            warn.append(f"diagram {d.id!r} is not assigned to any subsystem")

    assigned = [s for s in subs if sc.assignment.get(s) in ids]

    # Per-diagram arc discipline and per-(state, symbol) determinism.
    for sub in assigned:
        d = sc.diagram_of(sub)
        for src, dst, sym in d.labeled_arcs:
            if d.order(src) >= d.order(dst):
                bad.append(
                    f"{sub}: labeled arc ({src},{dst},{sym}) does not increase state order"
                )
        for src, dst in d.back_arcs:
            if d.order(dst) >= d.order(src):
                bad.append(f"{sub}: back arc ({src},{dst}) does not decrease state order")
        pairs = {(src, dst) for src, dst, _ in d.labeled_arcs}
        for src, dst in d.back_arcs:
            if (src, dst) in pairs:
                bad.append(f"{sub}: arc ({src},{dst}) is both labeled and back")
        seen_pair: dict[tuple[str, str], tuple[str, str, str]] = {}
        for arc in d.labeled_arcs:
            key = (arc[0], arc[2])
            if key in seen_pair:
                bad.append(
                    f"{sub}: symbol {arc[2]!r} leaves state {arc[0]!r} on two arcs"
                )
            seen_pair[key] = arc

    # Time diagram entries.
    for i, entry in enumerate(sc.time_diagram):
        if entry.tick < 0:
            bad.append(f"time diagram entry {i} has negative tick {entry.tick}")
        if entry.target is None:
            if not any(
                entry.symbol in sc.diagram_of(s).alphabet for s in assigned
            ):
                bad.append(
                    f"time diagram entry {i} broadcasts {entry.symbol!r}, known to no subsystem"
                )
        elif entry.target not in subs:
            bad.append(f"time diagram entry {i} targets unknown subsystem {entry.target!r}")
        elif entry.target in assigned and entry.symbol not in sc.diagram_of(entry.target).alphabet:
            bad.append(
                f"time diagram entry {i}: symbol {entry.symbol!r} is not in the alphabet of {entry.target!r}"
            )

    # After-effect partitions.
    ae = sc.after_effect
    all_arcs = {
        ArcRef(sub, src, dst, sym)
        for sub in assigned
        for (src, dst, sym) in sc.diagram_of(sub).labeled_arcs
    }
    for ref in sorted(all_arcs - ae.isolated - ae.coupled, key=lambda r: r.sort_key):
        bad.append(f"labeled arc {ref} is in neither the isolated nor the coupled set")
    for ref in sorted(ae.isolated & ae.coupled, key=lambda r: r.sort_key):
        bad.append(f"labeled arc {ref} is in both the isolated and the coupled set")
    for ref in sorted((ae.isolated | ae.coupled) - all_arcs, key=lambda r: r.sort_key):
        bad.append(f"after-effect scheme references unknown arc {ref}")
    symbols = set()
    for sub in assigned:
        symbols |= sc.diagram_of(sub).alphabet
    for sym in sorted(symbols - ae.individual_symbols - ae.general_symbols):
        bad.append(f"symbol {sym!r} is neither individual nor general")
    for sym in sorted(ae.individual_symbols & ae.general_symbols):
        bad.append(f"symbol {sym!r} is both individual and general")
    for ref in sorted(all_arcs, key=lambda r: r.sort_key):
        if ref.symbol in ae.individual_symbols and ref not in ae.isolated:
            bad.append(f"arc {ref} carries individual symbol {ref.symbol!r} but is not isolated")
        if ref.symbol in ae.general_symbols and ref not in ae.coupled:
            bad.append(f"arc {ref} carries general symbol {ref.symbol!r} but is not coupled")

    # Parent links.
    for parent_ref in sorted(ae.parent_links, key=lambda r: r.sort_key):
        link = ae.parent_links[parent_ref]
        if parent_ref not in ae.coupled:
            bad.append(f"parent link key {parent_ref} is not a coupled arc")
        kids = set(sc.hierarchy.children_of(parent_ref.subsystem))
        linked_subs = []
        for child_ref in link:
            if child_ref not in ae.coupled:
                bad.append(f"parent link of {parent_ref} references non-coupled arc {child_ref}")
            if child_ref.subsystem not in kids:
                bad.append(
                    f"parent link of {parent_ref} references {child_ref.subsystem!r}, "
                    f"not a child of {parent_ref.subsystem!r}"
                )
            linked_subs.append(child_ref.subsystem)
        if len(set(linked_subs)) != len(linked_subs):
            bad.append(f"parent link of {parent_ref} references one child subsystem twice")

    # Every coupled arc must be reachable from its diagram's initial state.
    reach: dict[str, set[str]] = {}
    for sub in assigned:
        d = sc.diagram_of(sub)
        edges: dict[str, list[str]] = {}
        for src, dst, _ in d.labeled_arcs:
            edges.setdefault(src, []).append(dst)
        for src, dst in d.back_arcs:
            edges.setdefault(src, []).append(dst)
        seen = {d.initial}
        stack = [d.initial]
        while stack:
            for nxt in edges.get(stack.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        reach[sub] = seen
    for ref in sorted(ae.coupled & all_arcs, key=lambda r: r.sort_key):
        if ref.src not in reach[ref.subsystem]:
            bad.append(f"coupled arc {ref} starts in a state unreachable from the initial state")

    if ae.upward_threshold != "all":
        if not isinstance(ae.upward_threshold, int) or ae.upward_threshold < 1:
            bad.append(f"upward threshold must be 'all' or a positive integer, got {ae.upward_threshold!r}")
    if sc.backstep_timeout < 1:
        bad.append(f"backstep timeout must be at least 1 tick, got {sc.backstep_timeout}")
    if sc.horizon < 0:
        bad.append(f"horizon must be >= 0, got {sc.horizon}")

    # Double role: a general symbol scheduled directly at a subsystem whose
    # matching arcs also sit inside some parent-link tuple.
    linked_children = {ref for link in ae.parent_links.values() for ref in link}
    flagged: set[tuple[str, str]] = set()
    for entry in sc.time_diagram:
        if entry.symbol not in ae.general_symbols:
            continue
        targets = [entry.target] if entry.target is not None else list(assigned)
        for sub in targets:
            if sub not in assigned or (sub, entry.symbol) in flagged:
                continue
            d = sc.diagram_of(sub)
            hit = any(
                ArcRef(sub, src, dst, sym) in linked_children
                for src, dst, sym in d.labeled_arcs
                if sym == entry.symbol
            )
            if hit:
                flagged.add((sub, entry.symbol))
                warn.append(
                    f"general symbol {entry.symbol!r} is delivered directly to {sub!r} "
                    "although its arcs are already driven by a parent link"
                )

    return ScenarioValidationReport(sc.id, tuple(bad), tuple(warn))


@dataclass(frozen=True)
class Configuration:
    """Snapshot between ticks: per-subsystem (state, entry tick) and the
    tick of the last effective activity (feeds the backstep clock)."""

    states: Mapping[str, tuple[str, int]]
    last_activity: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(
            self, "states", {k: (v[0], v[1]) for k, v in self.states.items()}
        )
        object.__setattr__(self, "last_activity", dict(self.last_activity))

    def state_of(self, subsystem: str) -> str:
        return self.states[subsystem][0]


def initial_configuration(sc: Scenario) -> Configuration:
    states = {sub: (sc.diagram_of(sub).initial, 0) for sub in sc.subsystems()}
    return Configuration(states, {sub: 0 for sub in sc.subsystems()})


@dataclass(frozen=True)
class Delivery:
    tick: int
    subsystem: str
    symbol: str
    symbol_kind: str  # "individual" | "general"
    effective: bool
    kind = "delivery"


@dataclass(frozen=True)
class Firing:
    tick: int
    subsystem: str
    src: str
    dst: str
    symbol: str
    cause: str  # "direct" | "downward-propagation" | "upward-propagation"
    kind = "firing"


@dataclass(frozen=True)
class Backstep:
    tick: int
    subsystem: str
    src: str
    dst: str
    kind = "backstep"


@dataclass(frozen=True)
class Skipped:
    """Downward propagation found the child outside the arc's source state."""

    tick: int
    subsystem: str
    src: str
    dst: str
    symbol: str
    actual_state: str
    kind = "skipped"


Event = Union[Delivery, Firing, Backstep, Skipped]


def event_row(event: Event) -> tuple[str, str, str, str, str, str, str]:
    """Flat record (kind, subsystem, symbol, src, dst, cause, effective)."""
    if isinstance(event, Delivery):
        return ("delivery", event.subsystem, event.symbol, "", "", event.symbol_kind,
                "true" if event.effective else "false")
    if isinstance(event, Firing):
        return ("firing", event.subsystem, event.symbol, event.src, event.dst,
                event.cause, "true")
    if isinstance(event, Backstep):
        return ("backstep", event.subsystem, "", event.src, event.dst, "timeout", "true")
    return ("skipped", event.subsystem, event.symbol, event.src, event.dst,
            "downward-propagation", "false")


def due_deliveries(sc: Scenario, tick: int) -> list[tuple[str, str]]:
    """Expanded (target, symbol) list for one tick: broadcasts fan out to
    every subsystem knowing the symbol; order is hierarchy preorder of the
    target, then declaration order."""
    pre = {sub: i for i, sub in enumerate(sc.subsystems())}
    out: list[tuple[int, int, str, str]] = []
    for idx, entry in enumerate(sc.time_diagram):
        if entry.tick != tick:
            continue
        if entry.target is not None:
            out.append((pre[entry.target], idx, entry.target, entry.symbol))
        else:
            for sub in sc.subsystems():
                if entry.symbol in sc.diagram_of(sub).alphabet:
                    out.append((pre[sub], idx, sub, entry.symbol))
    out.sort(key=lambda item: (item[0], item[1]))
    return [(sub, sym) for _, _, sub, sym in out]


def step(
    config: Configuration,
    deliveries: Sequence[tuple[str, str]],
    sc: Scenario,
    tick: int,
) -> tuple[Configuration, tuple[Event, ...]]:
    """One tick: deliver symbols, propagate upward, then backstep."""
    ae = sc.after_effect
    states = dict(config.states)
    activity = dict(config.last_activity)
    events: list[Event] = []
    fired: set[ArcRef] = set()

    def fire(ref: ArcRef, cause: str) -> None:
        states[ref.subsystem] = (ref.dst, tick)
        activity[ref.subsystem] = tick
        fired.add(ref)
        events.append(Firing(tick, ref.subsystem, ref.src, ref.dst, ref.symbol, cause))

    def cascade_down(parent_ref: ArcRef) -> None:
        for child in ae.parent_links.get(parent_ref, ()):
            if states[child.subsystem][0] == child.src:
                fire(child, "downward-propagation")
                cascade_down(child)
            else:
                events.append(
                    Skipped(tick, child.subsystem, child.src, child.dst, child.symbol,
                            states[child.subsystem][0])
                )

    # Phase 1: deliveries in the given order.
    for target, symbol in deliveries:
        d = sc.diagram_of(target)
        here = states[target][0]
        pool = ae.isolated if symbol in ae.individual_symbols else ae.coupled
        kind = "individual" if symbol in ae.individual_symbols else "general"
        enabled = [
            ArcRef(target, src, dst, sym)
            for src, dst, sym in d.labeled_arcs
            if sym == symbol and src == here and ArcRef(target, src, dst, sym) in pool
        ]
        if len(enabled) != 1:
            events.append(Delivery(tick, target, symbol, kind, False))
            continue
        events.append(Delivery(tick, target, symbol, kind, True))
        fire(enabled[0], "direct")
        if kind == "general":
            cascade_down(enabled[0])

    # Phase 2: upward propagation to fixpoint.
    parent_refs = sorted(ae.parent_links, key=lambda r: r.sort_key)
    changed = True
    while changed:
        changed = False
        for parent_ref in parent_refs:
            if parent_ref in fired:
                continue
            link = ae.parent_links[parent_ref]
            done = sum(1 for child in link if child in fired)
            if done < ae.required_count(link):
                continue
            if states[parent_ref.subsystem][0] != parent_ref.src:
                continue
            fire(parent_ref, "upward-propagation")
            changed = True

    # Phase 3: backstep on prolonged silence.
    for sub in sc.subsystems():
        if tick - activity[sub] < sc.backstep_timeout:
            continue
        d = sc.diagram_of(sub)
        here = states[sub][0]
        options = [(src, dst) for src, dst in d.back_arcs if src == here]
        if not options:
            continue
        src, dst = min(options, key=lambda arc: d.order(arc[0]) - d.order(arc[1]))
        states[sub] = (dst, tick)
        activity[sub] = tick
        events.append(Backstep(tick, sub, src, dst))

    return Configuration(states, activity), tuple(events)


@dataclass(frozen=True)
class Trajectory:
    scenario_id: str
    horizon: int
    initial: Configuration
    configs: tuple[Configuration, ...]  # configs[t] holds after tick t
    events: tuple[Event, ...]

    def final_configuration(self) -> Configuration:
        return self.configs[-1] if self.configs else self.initial


def run_scenario(sc: Scenario, horizon: Union[int, None] = None) -> Trajectory:
    """Fold step over the tick grid 0..horizon-1."""
    report = validate_scenario(sc)
    if not report.passed:
        raise ValidationFailedError(report)
    h = sc.horizon if horizon is None else horizon
    if h < 0:
        raise HorizonExceededError(f"horizon must be >= 0, got {h}")
    late = [e for e in sc.time_diagram if e.tick >= h]
    if late:
        raise HorizonExceededError(
            f"time diagram schedules tick {late[0].tick} beyond horizon {h}"
        )
    config = initial_configuration(sc)
    configs: list[Configuration] = []
    events: list[Event] = []
    for t in range(h):
        config, tick_events = step(config, due_deliveries(sc, t), sc, t)
        configs.append(config)
        events.extend(tick_events)
    return Trajectory(sc.id, h, initial_configuration(sc), tuple(configs), tuple(events))


@dataclass(frozen=True)
class EfficiencyCriterion:
    scores: Mapping[tuple[str, str], float]  # (subsystem, state) -> value

    def __post_init__(self):
        object.__setattr__(
            self, "scores", {tuple(k): float(v) for k, v in self.scores.items()}
        )

    def score(self, subsystem: str, state: str) -> float:
        try:
            return self.scores[(subsystem, state)]
        except KeyError:
            raise MissingScoreError(f"no score for state {state!r} of {subsystem!r}") from None


@dataclass(frozen=True)
class EfficiencySeries:
    subsystems: tuple[str, ...]
    per_subsystem: Mapping[str, tuple[float, ...]]
    aggregate: tuple[float, ...]


def efficiency_process(tr: Trajectory, crit: EfficiencyCriterion) -> EfficiencySeries:
    """w(t) per subsystem (score of the state held after tick t) and the
    per-tick sum across subsystems."""
    subs = tuple(sorted(tr.initial.states))
    per: dict[str, list[float]] = {sub: [] for sub in subs}
    for config in tr.configs:
        for sub in subs:
            per[sub].append(crit.score(sub, config.state_of(sub)))
    agg = tuple(sum(per[sub][t] for sub in subs) for t in range(len(tr.configs)))
    return EfficiencySeries(subs, {s: tuple(v) for s, v in per.items()}, agg)


@dataclass(frozen=True)
class ScenarioReport:
    scenario_id: str
    horizon: int
    subsystems: tuple[str, ...]
    complete: bool
    non_final: tuple[str, ...]
    redundancy_incidents: tuple[tuple[str, tuple[int, ...]], ...]
    backstep_counts: Mapping[str, int]
    backstep_total: int
    backstep_frequency: float
    coupled_counts: Mapping[str, int]
    coupled_total: int
    coupled_frequency: float
    propagation_counts: Mapping[str, int]
    efficiency: Union[EfficiencySeries, None] = None


def analyze_trajectory(
    tr: Trajectory, sc: Scenario, crit: Union[EfficiencyCriterion, None] = None
) -> ScenarioReport:
    """Recount the event log into the scenario quality figures."""
    if tr.scenario_id != sc.id:
        raise TrajectoryScenarioMismatchError(
            f"trajectory belongs to {tr.scenario_id!r}, not {sc.id!r}"
        )
    subs = sc.subsystems()
    if set(tr.initial.states) != set(subs):
        raise TrajectoryScenarioMismatchError("trajectory subsystems differ from the scenario's")
    if crit is not None:
        for sub in subs:
            for state in sc.diagram_of(sub).states:
                if (sub, state) not in crit.scores:
                    raise MissingScoreError(f"no score for state {state!r} of {sub!r}")

    final = tr.final_configuration()
    non_final = tuple(
        sub for sub in subs if final.state_of(sub) != sc.diagram_of(sub).final
    )

    delivered: dict[str, dict[str, list[int]]] = {}
    backsteps: dict[str, int] = {sub: 0 for sub in subs}
    coupled: dict[str, int] = {sub: 0 for sub in subs}
    propagated: dict[str, int] = {sub: 0 for sub in subs}
    for event in tr.events:
        if isinstance(event, Delivery):
            delivered.setdefault(event.subsystem, {}).setdefault(
                event.symbol_kind, []
            ).append(event.tick)
        elif isinstance(event, Backstep):
            backsteps[event.subsystem] += 1
        elif isinstance(event, Firing):
            ref = ArcRef(event.subsystem, event.src, event.dst, event.symbol)
            if ref in sc.after_effect.coupled:
                coupled[event.subsystem] += 1
            if event.cause != "direct":
                propagated[event.subsystem] += 1

    incidents = []
    for sub in subs:
        kinds = delivered.get(sub, {})
        if kinds.get("individual") and kinds.get("general"):
            ticks = sorted(set(kinds["individual"]) | set(kinds["general"]))
            incidents.append((sub, tuple(ticks)))

    back_total = sum(backsteps.values())
    coupled_total = sum(coupled.values())
    h = max(tr.horizon, 1)
    return ScenarioReport(
        scenario_id=sc.id,
        horizon=tr.horizon,
        subsystems=subs,
        complete=not non_final,
        non_final=non_final,
        redundancy_incidents=tuple(incidents),
        backstep_counts=backsteps,
        backstep_total=back_total,
        backstep_frequency=back_total / h,
        coupled_counts=coupled,
        coupled_total=coupled_total,
        coupled_frequency=coupled_total / h,
        propagation_counts=propagated,
        efficiency=efficiency_process(tr, crit) if crit is not None else None,
    )


@dataclass(frozen=True)
class ComparisonResult:
    """Scenario ids best first; ids sharing a group are declared ties."""

    groups: tuple[tuple[str, ...], ...]


def compare_scenarios(reports: Sequence[ScenarioReport]) -> ComparisonResult:
    """Rank lexicographically: completeness, then final aggregate
    efficiency (missing series counts as 0), then fewer backsteps, then
    fewer redundancy incidents."""
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    base = set(reports[0].subsystems)
    for r in reports[1:]:
        if set(r.subsystems) != base:
            raise IncomparableReportsError(
                f"{r.scenario_id!r} covers different subsystems than {reports[0].scenario_id!r}"
            )

    def key(r: ScenarioReport) -> tuple:
        final_eff = 0.0
        if r.efficiency is not None and r.efficiency.aggregate:
            final_eff = r.efficiency.aggregate[-1]
        return (0 if r.complete else 1, -final_eff, r.backstep_total,
                len(r.redundancy_incidents))

    ordered = sorted(reports, key=key)
    groups: list[list[str]] = []
    last_key = None
    for r in ordered:
        k = key(r)
        if k == last_key:
            groups[-1].append(r.scenario_id)
        else:
            groups.append([r.scenario_id])
            last_key = k
    return ComparisonResult(tuple(tuple(g) for g in groups))


def replay_events(tr: Trajectory, sc: Scenario) -> bool:
    """Fold the logged state changes over the initial configuration and
    compare against the stored per-tick configurations."""
    states = dict(tr.initial.states)
    by_tick: dict[int, list[Event]] = {}
    for event in tr.events:
        by_tick.setdefault(event.tick, []).append(event)
    for t, config in enumerate(tr.configs):
        for event in by_tick.get(t, ()):
            if isinstance(event, (Firing, Backstep)):
                if states[event.subsystem][0] != event.src:
                    return False
                states[event.subsystem] = (event.dst, t)
        if {k: v for k, v in states.items()} != dict(config.states):
            return False
    return True
