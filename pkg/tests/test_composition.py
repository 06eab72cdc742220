"""Composition operators and consistency checking against the exhaustive oracle."""

import itertools
import random

import pytest

from statedev.canonical import Arc, ArcKind, CanonicalDiagram
from statedev.composition import (
    ConsistencyVerdict,
    IntervalMismatchError,
    IntervalOrderViolationError,
    NoUniqueExtremesError,
    OrderCycleError,
    OrderRelationSpec,
    PrescribedEntry,
    PrescribedSequence,
    SpaceBoundExceededError,
    TimedDiagramSet,
    TupleOutOfProductError,
    UnknownDiagramError,
    UnknownStateError,
    check_consistency,
    compose_parallel,
    compose_sequential,
    enumerate_attainable_sequences,
    execution_satisfies,
    generalize,
)
from tests.conftest import chain


def two_chain(name, delta=1, horizon=6):
    return CanonicalDiagram(
        id=name,
        states=(f"{name}0", f"{name}1"),
        dev_arcs=(Arc(f"{name}0", f"{name}1", delta, ArcKind.DEV),),
        back_arcs=(),
        initial=f"{name}0",
        final=f"{name}1",
        horizon=horizon,
    )


def test_sequential_two_chains():
    dset = TimedDiagramSet((two_chain("a"), two_chain("b")), (3, 5))
    d = compose_sequential(dset)
    assert len(d.states) == 4
    assert len(d.dev_arcs) == 3
    link = [a for a in d.dev_arcs if a.src == "0.a1" and a.dst == "1.b0"]
    assert len(link) == 1 and link[0].delta == 2
    assert d.initial == "0.a0" and d.final == "1.b1"
    assert d.horizon == 5


def test_sequential_requires_strictly_increasing_intervals():
    dset = TimedDiagramSet((two_chain("a"), two_chain("b")), (5, 5))
    with pytest.raises(IntervalOrderViolationError):
        compose_sequential(dset)


def test_sequential_single_diagram_is_identity():
    a = two_chain("a")
    assert compose_sequential(TimedDiagramSet((a,), (4,))) is a


def test_interval_must_fit_component_horizon():
    with pytest.raises(ValueError):
        TimedDiagramSet((two_chain("a", horizon=3),), (5,))


def test_parallel_product_counts():
    dset = TimedDiagramSet((two_chain("a"), two_chain("b")), (6, 6))
    frag = compose_parallel(dset)
    assert len(frag.diagram.states) == 4
    assert len(frag.diagram.dev_arcs) == 4
    assert frag.diagram.initial == "(a0,b0)"
    assert frag.diagram.final == "(a1,b1)"


def test_parallel_rejects_mismatched_intervals():
    dset = TimedDiagramSet((two_chain("a"), two_chain("b")), (3, 4))
    with pytest.raises(IntervalMismatchError):
        compose_parallel(dset)


def test_parallel_arc_origin_projects_to_component_arcs():
    a, b = chain(3, horizon=6), two_chain("b")
    a = CanonicalDiagram(
        id="a", states=a.states, dev_arcs=a.dev_arcs, back_arcs=a.back_arcs,
        initial=a.initial, final=a.final, horizon=6,
    )
    frag = compose_parallel(TimedDiagramSet((a, b), (6, 6)))
    for lifted, (idx, original) in frag.arc_origin.items():
        component = frag.components[idx]
        assert original in component.dev_arcs + component.back_arcs
        assert lifted.delta == original.delta
        assert lifted.kind is original.kind


def test_generalize_total_order_chain():
    dset = TimedDiagramSet((two_chain("a"), two_chain("b")), (6, 6))
    sel = [("a0", "b0"), ("a0", "b1"), ("a1", "b1")]
    order = OrderRelationSpec((
        (("a0", "b0"), ("a0", "b1")),
        (("a0", "b1"), ("a1", "b1")),
    ))
    gen = generalize(dset, sel, order)
    d = gen.diagram
    assert len(d.states) == 3
    assert len(d.dev_arcs) == 2       # covering pairs only
    assert all(a.delta == 0 for a in d.dev_arcs)
    assert d.initial == "(a0,b0)" and d.final == "(a1,b1)"


def test_generalize_skips_transitive_pairs():
    dset = TimedDiagramSet((two_chain("a"), two_chain("b")), (6, 6))
    sel = [("a0", "b0"), ("a0", "b1"), ("a1", "b1")]
    order = OrderRelationSpec((
        (("a0", "b0"), ("a0", "b1")),
        (("a0", "b1"), ("a1", "b1")),
        (("a0", "b0"), ("a1", "b1")),  # implied; must not add a third arc
    ))
    assert len(generalize(dset, sel, order).diagram.dev_arcs) == 2


def test_generalize_rejects_cycles():
    dset = TimedDiagramSet((two_chain("a"), two_chain("b")), (6, 6))
    sel = [("a0", "b0"), ("a1", "b1")]
    order = OrderRelationSpec((
        (("a0", "b0"), ("a1", "b1")),
        (("a1", "b1"), ("a0", "b0")),
    ))
    with pytest.raises(OrderCycleError):
        generalize(dset, sel, order)


def test_generalize_requires_unique_extremes():
    dset = TimedDiagramSet((two_chain("a"), two_chain("b")), (6, 6))
    sel = [("a0", "b0"), ("a0", "b1"), ("a1", "b0"), ("a1", "b1")]
    order = OrderRelationSpec((
        (("a0", "b0"), ("a0", "b1")),
        (("a1", "b0"), ("a1", "b1")),
    ))
    with pytest.raises(NoUniqueExtremesError):
        generalize(dset, sel, order)


def test_generalize_rejects_tuples_outside_product():
    dset = TimedDiagramSet((two_chain("a"), two_chain("b")), (6, 6))
    with pytest.raises(TupleOutOfProductError):
        generalize(dset, [("a0", "nope")], OrderRelationSpec(()))
    with pytest.raises(TupleOutOfProductError):
        generalize(dset, [("a0",)], OrderRelationSpec(()))


def test_consistency_chain_meets_deadline():
    d = chain(2, delta=2, horizon=4)
    dset = TimedDiagramSet((d,), (4,))
    seq = PrescribedSequence((PrescribedEntry(0, "s2", 2),))
    verdict = check_consistency(dset, seq)
    assert verdict.consistent
    assert verdict.satisfied_at == (2,)
    (firing,) = verdict.witness
    assert (firing.tick, firing.diagram, firing.arc.dst) == (2, 0, "s2")


def test_consistency_deadline_too_tight():
    d = chain(2, delta=2, horizon=4)
    dset = TimedDiagramSet((d,), (4,))
    verdict = check_consistency(dset, PrescribedSequence((PrescribedEntry(0, "s2", 1),)))
    assert not verdict.consistent
    assert verdict.failed_prefix == 1
    assert verdict.witness is None


def test_consistency_empty_sequence_is_trivially_met():
    dset = TimedDiagramSet((chain(2),), (3,))
    verdict = check_consistency(dset, PrescribedSequence(()))
    assert verdict.consistent
    assert verdict.witness == ()


def test_consistency_cross_diagram_ordering():
    a = chain(3, horizon=6)
    b = two_chain("b", delta=3, horizon=6)
    dset = TimedDiagramSet((a, b), (6, 6))
    seq = PrescribedSequence((
        PrescribedEntry(0, "s2", 2),
        PrescribedEntry(1, "b1", 3),
        PrescribedEntry(0, "s3", 6),
    ))
    verdict = check_consistency(dset, seq)
    assert verdict.consistent
    ticks = verdict.satisfied_at
    assert ticks is not None and list(ticks) == sorted(ticks)
    assert all(t <= e.deadline for t, e in zip(ticks, seq.entries))


def test_consistency_repeated_state_is_satisfied_by_one_visit():
    a = chain(3, horizon=6)
    dset = TimedDiagramSet((a,), (6,))
    seq = PrescribedSequence((
        PrescribedEntry(0, "s2", 3),
        PrescribedEntry(0, "s3", 3),
        PrescribedEntry(0, "s3", 3),
    ))
    verdict = check_consistency(dset, seq)
    assert verdict.consistent
    assert verdict.satisfied_at == (1, 2, 2)


def test_consistency_failed_prefix_counts_satisfiable_head():
    a = chain(3, horizon=6)
    dset = TimedDiagramSet((a,), (6,))
    seq = PrescribedSequence((
        PrescribedEntry(0, "s2", 3),
        PrescribedEntry(0, "s3", 3),
        PrescribedEntry(0, "s1", 3),
    ))
    # s2 then s3 are easy; returning to s1 needs a back arc the chain lacks.
    verdict = check_consistency(dset, seq)
    assert not verdict.consistent
    assert verdict.failed_prefix == 3


def test_prescribed_sequence_requires_monotone_deadlines():
    with pytest.raises(ValueError):
        PrescribedSequence((PrescribedEntry(0, "s2", 3), PrescribedEntry(0, "s3", 2)))


def test_consistency_validates_references():
    dset = TimedDiagramSet((chain(2),), (3,))
    with pytest.raises(UnknownDiagramError):
        check_consistency(dset, PrescribedSequence((PrescribedEntry(1, "s2", 2),)))
    with pytest.raises(UnknownStateError):
        check_consistency(dset, PrescribedSequence((PrescribedEntry(0, "zz", 2),)))


def test_enumeration_bound_guard():
    d = chain(4, horizon=8, back=True)
    dset = TimedDiagramSet((d, d), (8, 8))
    with pytest.raises(SpaceBoundExceededError):
        enumerate_attainable_sequences(dset, 8, bound=3)


def test_enumeration_of_empty_diagram_set():
    assert enumerate_attainable_sequences(TimedDiagramSet((), ()), 4) == [()]


def random_diagram(rng, name, n_states, n_arcs, horizon):
    states = tuple(f"{name}{i}" for i in range(n_states))
    arcs = set()
    for _ in range(n_arcs * 3):
        if len(arcs) >= n_arcs:
            break
        i, j = rng.randrange(n_states), rng.randrange(n_states)
        if i == j:
            continue
        if i < j:
            arcs.add(Arc(states[i], states[j], rng.randrange(0, 3), ArcKind.DEV))
        else:
            # nonzero delay keeps every cycle through back arcs timed
            arcs.add(Arc(states[i], states[j], rng.randrange(1, 3), ArcKind.BACK))
    dev = tuple(sorted((a for a in arcs if a.kind is ArcKind.DEV), key=lambda a: (a.src, a.dst)))
    back = tuple(sorted((a for a in arcs if a.kind is ArcKind.BACK), key=lambda a: (a.src, a.dst)))
    return CanonicalDiagram(
        id=name, states=states, dev_arcs=dev, back_arcs=back,
        initial=states[0], final=states[-1], horizon=horizon,
    )


def test_verdicts_agree_with_exhaustive_oracle_on_small_corpus():
    rng = random.Random(2024)
    checked = 0
    for _ in range(12):
        n = rng.choice((1, 2))
        diagrams = tuple(
            random_diagram(rng, f"d{k}", rng.randrange(2, 4), rng.randrange(1, 4), 6)
            for k in range(n)
        )
        dset = TimedDiagramSet(diagrams, tuple(6 for _ in diagrams))
        executions = enumerate_attainable_sequences(dset, 6)
        for _ in range(8):
            entries = []
            deadline = 0
            for _ in range(rng.randrange(1, 4)):
                k = rng.randrange(n)
                deadline = min(6, deadline + rng.randrange(0, 3))
                entries.append(PrescribedEntry(k, rng.choice(diagrams[k].states), deadline))
            seq = PrescribedSequence(tuple(entries))
            fast = check_consistency(dset, seq).consistent
            slow = any(execution_satisfies(dset, joint, seq) for joint in executions)
            assert fast == slow, f"disagree on {seq} over {[d.id for d in diagrams]}"
            checked += 1
    assert checked == 96


def test_witness_fires_are_legal_and_ordered():
    a = chain(3, horizon=6, back=True)
    dset = TimedDiagramSet((a,), (6,))
    seq = PrescribedSequence((
        PrescribedEntry(0, "s2", 2),
        PrescribedEntry(0, "s3", 4),
        PrescribedEntry(0, "s2", 6),   # needs the back arc
    ))
    verdict = check_consistency(dset, seq)
    assert verdict.consistent
    ticks = [f.tick for f in verdict.witness]
    assert ticks == sorted(ticks)
    kinds = [f.arc.kind for f in verdict.witness]
    assert ArcKind.BACK in kinds
