"""Predicate scales, hierarchical classificators, and rule matrices.

A scale carves the value space of one or more parameters into named
states through an ordered list of predicates; evaluating it against a
parameter assignment yields exactly one state when the scale is sound.
Classificators refine single states with child scales, giving
multi-level classification paths. Rule matrices map a vector of
per-parameter dynamics symbols onto classification classes.

Disjointness of predicates and the child-implies-parent property of
refinements are undecidable for the open predicate grammar, so both are
checked by seeded sampling over declared parameter ranges.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import predicates as pred
from .dynamics import VOCABULARY, DynamicsKind
from .errors import MissingParameterError, StatedevError


class NoMatchError(StatedevError):
    """No predicate of the scale held for the assignment."""

    def __init__(self, scale_id: str):
        super().__init__(f"no predicate of scale {scale_id!r} matched")
        self.scale_id = scale_id


class MultipleMatchError(StatedevError):
    """Two or more predicates held at once; positions are 1-based."""

    def __init__(self, scale_id: str, positions: Sequence[int]):
        positions = tuple(positions)
        super().__init__(
            f"scale {scale_id!r} matched predicates at positions {list(positions)}"
        )
        self.scale_id = scale_id
        self.positions = positions


class MissingParameterRangeError(StatedevError):
    """Sampling needs a range or level set for a referenced parameter."""

    def __init__(self, names):
        names = tuple(sorted(names))
        super().__init__("no sampling range for parameter(s): " + ", ".join(names))
        self.names = names


@dataclass(frozen=True)
class ParameterDecl:
    """Declared model parameter: numeric, or ordinal with a total level order."""

    name: str
    kind: str = "numeric"
    levels: tuple[str, ...] | None = None  # ordinal only, lowest first
    bounds: tuple[float, float] | None = None  # optional sampling range

    def __post_init__(self):
        if self.kind not in ("numeric", "ordinal"):
            raise ValueError(f"parameter kind must be numeric or ordinal, got {self.kind!r}")
        if self.kind == "ordinal":
            if not self.levels:
                raise ValueError(f"ordinal parameter {self.name!r} needs levels")
            object.__setattr__(self, "levels", tuple(self.levels))
            if len(set(self.levels)) != len(self.levels):
                raise ValueError(f"duplicate level in parameter {self.name!r}")
        elif self.levels is not None:
            raise ValueError(f"numeric parameter {self.name!r} cannot declare levels")
        if self.bounds is not None:
            lo, hi = self.bounds
            if lo > hi:
                raise ValueError(f"bounds of {self.name!r} are reversed")
            object.__setattr__(self, "bounds", (float(lo), float(hi)))


Parameters = Mapping[str, ParameterDecl]


def _orders(parameters: Parameters | None) -> dict[str, tuple[str, ...]]:
    if not parameters:
        return {}
    return {
        decl.name: decl.levels for decl in parameters.values() if decl.levels is not None
    }


@dataclass(frozen=True)
class Predicate:
    """Named predicate; the expression is parsed once at construction."""

    name: str
    expression: str
    ast: pred.Node = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ast", pred.parse(self.expression))

    @property
    def references(self) -> frozenset[str]:
        return pred.referenced_names(self.ast)

    def holds(self, assignment, orders=None) -> bool:
        return pred.evaluate(self.ast, assignment, orders)


@dataclass(frozen=True)
class State:
    id: str
    scale_position: int  # 1-based, matches the predicate order
    label: str = ""


@dataclass(frozen=True)
class Scale:
    """Ordered predicates paired one-to-one with ordered states."""

    id: str
    predicates: tuple[Predicate, ...]
    states: tuple[State, ...]

    def __post_init__(self):
        object.__setattr__(self, "predicates", tuple(self.predicates))
        object.__setattr__(self, "states", tuple(self.states))
        if not self.predicates:
            raise ValueError(f"scale {self.id!r} is empty")
        if len(self.predicates) != len(self.states):
            raise ValueError(f"scale {self.id!r}: predicate and state counts differ")
        ids = [s.id for s in self.states]
        if len(set(ids)) != len(ids):
            raise ValueError(f"scale {self.id!r}: duplicate state id")
        for i, state in enumerate(self.states):
            if state.scale_position != i + 1:
                raise ValueError(
                    f"scale {self.id!r}: state {state.id!r} at position "
                    f"{state.scale_position}, expected {i + 1}"
                )

    @property
    def references(self) -> frozenset[str]:
        out: set[str] = set()
        for p in self.predicates:
            out |= p.references
        return frozenset(out)


def _check_missing(references, assignment, orders) -> None:
    level_pool: set[str] = set()
    for levels in orders.values():
        level_pool.update(levels)
    missing = [n for n in references if n not in assignment and n not in level_pool]
    if missing:
        raise MissingParameterError(missing)


def evaluate_scale(
    scale: Scale,
    assignment: Mapping[str, object],
    parameters: Parameters | None = None,
    lenient: bool = False,
) -> State:
    """Classify one assignment on one scale.

    Exactly one predicate is expected to hold. Zero matches raise
    NoMatchError; several raise MultipleMatchError unless lenient is
    set, in which case the first match wins.
    """
    orders = _orders(parameters)
    _check_missing(scale.references, assignment, orders)
    hits = [
        i for i, p in enumerate(scale.predicates) if p.holds(assignment, orders)
    ]
    if not hits:
        raise NoMatchError(scale.id)
    if len(hits) > 1 and not lenient:
        raise MultipleMatchError(scale.id, [i + 1 for i in hits])
    return scale.states[hits[0]]


@dataclass(frozen=True)
class Classificator:
    """Hierarchical continuation of a scale: refinements attach a child
    scale to (scale id, predicate position). Positions are 1-based."""

    id: str
    root: Scale
    refinements: Mapping[tuple[str, int], Scale] = field(default_factory=dict)
    time_window: tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "refinements", dict(self.refinements))
        if self.time_window is not None:
            a, b = self.time_window
            if a > b:
                raise ValueError(f"classificator {self.id!r}: reversed time window")
            object.__setattr__(self, "time_window", (int(a), int(b)))
        # Tree check: every refinement reachable from the root, each child
        # scale attached exactly once, no scale repeated along any path.
        scales = {self.root.id: self.root}
        pending = dict(self.refinements)
        progress = True
        while pending and progress:
            progress = False
            for (sid, pos), child in list(pending.items()):
                if sid not in scales:
                    continue
                parent = scales[sid]
                if not 1 <= pos <= len(parent.predicates):
                    raise ValueError(
                        f"classificator {self.id!r}: refinement position {pos} "
                        f"outside scale {sid!r}"
                    )
                if child.id in scales:
                    raise ValueError(
                        f"classificator {self.id!r}: scale {child.id!r} attached twice"
                    )
                scales[child.id] = child
                del pending[(sid, pos)]
                progress = True
        if pending:
            bad = ", ".join(repr(sid) for sid, _ in pending)
            raise ValueError(
                f"classificator {self.id!r}: refinements dangle from unknown scale(s) {bad}"
            )
        object.__setattr__(self, "_scales_by_id", scales)

    def scale_by_id(self, sid: str) -> Scale:
        return self._scales_by_id[sid]

    @property
    def all_scales(self) -> tuple[Scale, ...]:
        return tuple(self._scales_by_id.values())


def classify_hierarchical(
    classificator: Classificator,
    assignment: Mapping[str, object],
    parameters: Parameters | None = None,
    lenient: bool = False,
) -> tuple[State, ...]:
    """Full classification path, root state first, deepest last.

    Scale errors propagate with the failing scale's id attached.
    """
    path: list[State] = []
    scale = classificator.root
    while True:
        state = evaluate_scale(scale, assignment, parameters, lenient)
        path.append(state)
        child = classificator.refinements.get((scale.id, state.scale_position))
        if child is None:
            return tuple(path)
        scale = child


@dataclass(frozen=True)
class SampleSpec:
    """How to sample assignments for the statistical soundness checks.

    ranges maps a parameter either to a numeric (low, high) pair or to
    an explicit level sequence; parameters absent here fall back to
    their declaration's bounds or levels.
    """

    ranges: Mapping[str, object] = field(default_factory=dict)
    samples: int = 1000
    seed: int = 0
    mode: str = "random"  # "random" | "grid"

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.mode not in ("random", "grid"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        object.__setattr__(self, "ranges", dict(self.ranges))


def _domains(spec: SampleSpec, names: Sequence[str], parameters: Parameters | None):
    parameters = parameters or {}
    domains = []
    unresolved = []
    for name in names:
        source = spec.ranges.get(name)
        if source is None:
            decl = parameters.get(name)
            if decl is not None and decl.levels is not None:
                source = decl.levels
            elif decl is not None and decl.bounds is not None:
                source = decl.bounds
        if source is None:
            unresolved.append(name)
            continue
        if (
            isinstance(source, Sequence)
            and len(source) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in source)
        ):
            domains.append((name, "numeric", (float(source[0]), float(source[1]))))
        else:
            domains.append((name, "levels", tuple(source)))
    if unresolved:
        raise MissingParameterRangeError(unresolved)
    return domains


def sample_assignments(
    spec: SampleSpec, names: Sequence[str], parameters: Parameters | None = None
):
    """Deterministic stream of assignments over the named parameters."""
    names = sorted(names)
    if not names:
        return
    domains = _domains(spec, names, parameters)
    if spec.mode == "random":
        rng = random.Random(spec.seed)
        for _ in range(spec.samples):
            out = {}
            for name, kind, dom in domains:
                if kind == "numeric":
                    out[name] = rng.uniform(dom[0], dom[1])
                else:
                    out[name] = rng.choice(dom)
            yield out
    else:
        per_axis = max(2, math.ceil(spec.samples ** (1.0 / len(domains))))
        axes = []
        for name, kind, dom in domains:
            if kind == "numeric":
                lo, hi = dom
                step = (hi - lo) / (per_axis - 1) if per_axis > 1 else 0.0
                axes.append([(name, lo + i * step) for i in range(per_axis)])
            else:
                axes.append([(name, level) for level in dom])
        for combo in itertools.product(*axes):
            yield dict(combo)


@dataclass(frozen=True)
class DisjointnessReport:
    scale_id: str
    samples: int
    overlaps: tuple  # (assignment, 1-based predicate positions) pairs

    @property
    def passed(self) -> bool:
        return not self.overlaps


def validate_scale_disjointness(
    scale: Scale,
    spec: SampleSpec,
    parameters: Parameters | None = None,
) -> DisjointnessReport:
    """Sample the parameter space and report every point where two or
    more predicates hold at once. Statistical, not a proof."""
    orders = _orders(parameters)
    count = 0
    overlaps = []
    for assignment in sample_assignments(spec, sorted(scale.references), parameters):
        count += 1
        hits = [
            i + 1 for i, p in enumerate(scale.predicates) if p.holds(assignment, orders)
        ]
        if len(hits) > 1:
            overlaps.append((assignment, tuple(hits)))
    return DisjointnessReport(scale_id=scale.id, samples=count, overlaps=tuple(overlaps))


@dataclass(frozen=True)
class RefinementReport:
    classificator_id: str
    samples: int
    violations: tuple  # (scale id, position, child predicate position, assignment)

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_classificator(
    classificator: Classificator,
    spec: SampleSpec,
    parameters: Parameters | None = None,
) -> RefinementReport:
    """Sampling check of the refinement property: every point accepted
    by a child predicate must satisfy the parent predicate it refines."""
    orders = _orders(parameters)
    total = 0
    violations = []
    for (sid, pos), child in sorted(classificator.refinements.items()):
        parent_pred = classificator.scale_by_id(sid).predicates[pos - 1]
        names = sorted(child.references | parent_pred.references)
        for assignment in sample_assignments(spec, names, parameters):
            total += 1
            parent_ok = parent_pred.holds(assignment, orders)
            for j, cp in enumerate(child.predicates):
                if cp.holds(assignment, orders) and not parent_ok:
                    violations.append((sid, pos, j + 1, assignment))
    return RefinementReport(
        classificator_id=classificator.id, samples=total, violations=tuple(violations)
    )


@dataclass(frozen=True)
class RuleMatrix:
    """Classification rules over dynamics symbols.

    Rows are parameters, columns are classes; the cell predicate for row
    p sees that parameter's current dynamics symbol under both the name
    ``state`` and the parameter's own name. A class matches when every
    cell of its column holds.
    """

    id: str
    parameters: tuple[str, ...]
    classes: tuple[str, ...]
    cells: tuple[tuple[Predicate, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "cells", tuple(tuple(row) for row in self.cells))
        if not self.parameters or not self.classes:
            raise ValueError(f"rule matrix {self.id!r} needs rows and columns")
        if len(set(self.parameters)) != len(self.parameters):
            raise ValueError(f"rule matrix {self.id!r}: duplicate row parameter")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError(f"rule matrix {self.id!r}: duplicate class id")
        if len(self.cells) != len(self.parameters):
            raise ValueError(f"rule matrix {self.id!r}: row count mismatch")
        allowed_extra = set(VOCABULARY) | {"state"}
        for i, row in enumerate(self.cells):
            if len(row) != len(self.classes):
                raise ValueError(
                    f"rule matrix {self.id!r}: row {i} has {len(row)} cells, "
                    f"expected {len(self.classes)}"
                )
            legal = allowed_extra | {self.parameters[i]}
            for j, cell in enumerate(row):
                stray = cell.references - legal
                if stray:
                    raise ValueError(
                        f"rule matrix {self.id!r}: cell ({i}, {j}) references "
                        f"{sorted(stray)} outside the row vocabulary"
                    )


def apply_rule_matrix(
    matrix: RuleMatrix, dyn_states: Mapping[str, object]
) -> frozenset[str]:
    """Classes whose entire column holds for the given dynamics symbols.

    dyn_states maps every row parameter to a DynamicsKind or its symbol
    string. The result may be empty and may hold several classes.
    """
    missing = [p for p in matrix.parameters if p not in dyn_states]
    if missing:
        raise MissingParameterError(missing)
    symbols = {}
    for name in matrix.parameters:
        value = dyn_states[name]
        if isinstance(value, DynamicsKind):
            value = value.value
        if value not in VOCABULARY:
            raise ValueError(f"unknown dynamics symbol {value!r} for {name!r}")
        symbols[name] = value
    matched = []
    for j, cls in enumerate(matrix.classes):
        ok = True
        for i, name in enumerate(matrix.parameters):
            env = {"state": symbols[name], name: symbols[name]}
            orders = {"state": VOCABULARY, name: VOCABULARY}
            if not matrix.cells[i][j].holds(env, orders):
                ok = False
                break
        if ok:
            matched.append(cls)
    return frozenset(matched)
