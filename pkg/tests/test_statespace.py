"""Scales, hierarchical classification, sampling checks, rule matrices."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from statedev.errors import MissingParameterError
from statedev.statespace import (
    Classificator,
    MissingParameterRangeError,
    MultipleMatchError,
    NoMatchError,
    Predicate,
    RuleMatrix,
    SampleSpec,
    Scale,
    State,
    apply_rule_matrix,
    classify_hierarchical,
    evaluate_scale,
    sample_assignments,
    validate_classificator,
    validate_scale_disjointness,
)


def scale(sid, *exprs, ids=None):
    ids = ids or [f"{sid}.{i + 1}" for i in range(len(exprs))]
    return Scale(
        id=sid,
        predicates=tuple(Predicate(f"{sid}[{i}]", e) for i, e in enumerate(exprs)),
        states=tuple(State(ids[i], i + 1) for i in range(len(exprs))),
    )


X3 = scale("x3", "x < 0", "0 <= x < 10", "x >= 10", ids=["neg", "low", "high"])


def test_evaluate_scale_partition_membership():
    assert evaluate_scale(X3, {"x": 5}).id == "low"
    assert evaluate_scale(X3, {"x": -3}).id == "neg"
    assert evaluate_scale(X3, {"x": 10}).id == "high"


def test_evaluate_scale_overlap_reports_positions():
    overlapping = scale("ov", "x < 5", "x < 10")
    with pytest.raises(MultipleMatchError) as err:
        evaluate_scale(overlapping, {"x": 2})
    assert err.value.positions == (1, 2)


def test_evaluate_scale_lenient_first_match():
    overlapping = scale("ov", "x < 5", "x < 10")
    assert evaluate_scale(overlapping, {"x": 2}, lenient=True).scale_position == 1


def test_evaluate_scale_gap_raises_no_match():
    gapped = scale("gap", "x < 0", "x > 0")
    with pytest.raises(NoMatchError):
        evaluate_scale(gapped, {"x": 0})


def test_evaluate_scale_missing_parameter():
    with pytest.raises(MissingParameterError):
        evaluate_scale(X3, {"y": 1})


def two_level_classificator():
    root = scale("sign", "x < 0", "x >= 0")
    child = scale("ysplit", "x >= 0 and y < 1", "x >= 0 and y >= 1")
    return Classificator(id="c", root=root, refinements={("sign", 2): child})


def test_classify_descends_into_refinement():
    path = classify_hierarchical(two_level_classificator(), {"x": 2, "y": 0})
    assert [s.id for s in path] == ["sign.2", "ysplit.1"]


def test_classify_stops_at_unrefined_state():
    path = classify_hierarchical(two_level_classificator(), {"x": -1, "y": 0})
    assert [s.id for s in path] == ["sign.1"]


def test_classify_propagates_no_match_at_root():
    gapped = scale("gap", "x < 0", "x > 0")
    c = Classificator(id="c", root=gapped)
    with pytest.raises(NoMatchError) as err:
        classify_hierarchical(c, {"x": 0})
    assert err.value.scale_id == "gap"


def test_refinement_position_must_exist():
    root = scale("sign", "x < 0", "x >= 0")
    with pytest.raises(ValueError):
        Classificator(id="c", root=root, refinements={("sign", 7): root})


def test_disjointness_pass_on_partition():
    spec = SampleSpec(ranges={"x": (-20.0, 20.0)}, samples=10_000, seed=7)
    report = validate_scale_disjointness(X3, spec)
    assert report.passed
    assert report.samples == 10_000


def test_disjointness_finds_overlap_point():
    overlapping = scale("ov", "x < 5", "x < 10")
    spec = SampleSpec(ranges={"x": (0.0, 4.0)}, samples=50, seed=1)
    report = validate_scale_disjointness(overlapping, spec)
    assert not report.passed
    for assignment, positions in report.overlaps:
        assert assignment["x"] < 5
        assert positions == (1, 2)


def test_disjointness_vacuous_without_predicate_pairs():
    # A single predicate has no pair to overlap with.
    single = scale("one", "x < 0")
    spec = SampleSpec(ranges={"x": (-1.0, 1.0)}, samples=10)
    assert validate_scale_disjointness(single, spec).passed


def test_scale_must_declare_at_least_one_state():
    with pytest.raises(ValueError):
        Scale(id="none", predicates=(), states=())


def test_disjointness_requires_ranges():
    with pytest.raises(MissingParameterRangeError) as err:
        validate_scale_disjointness(X3, SampleSpec(samples=10))
    assert err.value.names == ("x",)


def test_sub_predicate_check_passes_on_true_refinement():
    spec = SampleSpec(ranges={"x": (-5.0, 5.0), "y": (-5.0, 5.0)}, samples=2000, seed=3)
    assert validate_classificator(two_level_classificator(), spec).passed


def test_sub_predicate_check_catches_leaky_child():
    root = scale("sign", "x < 0", "x >= 0")
    leaky = scale("leak", "x > -5", "x <= -5")  # covers points the parent state excludes
    c = Classificator(id="c", root=root, refinements={("sign", 2): leaky})
    spec = SampleSpec(ranges={"x": (-4.0, 4.0)}, samples=500, seed=3)
    report = validate_classificator(c, spec)
    assert not report.passed
    scale_ids = {v[0] for v in report.violations}
    assert scale_ids == {"sign"}


def test_sampling_is_seed_deterministic():
    spec = SampleSpec(ranges={"x": (0.0, 1.0)}, samples=25, seed=11)
    a = list(sample_assignments(spec, ["x"]))
    b = list(sample_assignments(spec, ["x"]))
    assert a == b
    c = list(sample_assignments(SampleSpec(ranges={"x": (0.0, 1.0)}, samples=25, seed=12), ["x"]))
    assert a != c


def test_rule_matrix_single_cell():
    m = RuleMatrix(
        id="m",
        parameters=("p",),
        classes=("J1",),
        cells=((Predicate("c", "state = Growth"),),),
    )
    assert apply_rule_matrix(m, {"p": "Growth"}) == frozenset({"J1"})
    assert apply_rule_matrix(m, {"p": "Decline"}) == frozenset()


def test_rule_matrix_two_by_two():
    # J1 wants (Growth, Growth); J2 wants (Growth, Decline).
    m = RuleMatrix(
        id="m",
        parameters=("p", "q"),
        classes=("J1", "J2"),
        cells=(
            (Predicate("a", "state = Growth"), Predicate("b", "state = Growth")),
            (Predicate("c", "state = Growth"), Predicate("d", "state = Decline")),
        ),
    )
    assert apply_rule_matrix(m, {"p": "Growth", "q": "Decline"}) == frozenset({"J2"})
    assert apply_rule_matrix(m, {"p": "Growth", "q": "Growth"}) == frozenset({"J1"})


def test_rule_matrix_missing_row_parameter():
    m = RuleMatrix(
        id="m",
        parameters=("p",),
        classes=("J1",),
        cells=((Predicate("c", "state = Growth"),),),
    )
    with pytest.raises(MissingParameterError):
        apply_rule_matrix(m, {"q": "Growth"})


def test_rule_matrix_rejects_foreign_names():
    with pytest.raises(ValueError):
        RuleMatrix(
            id="m",
            parameters=("p",),
            classes=("J1",),
            cells=((Predicate("c", "other = Growth"),),),
        )


@given(st.floats(min_value=-100, max_value=100, allow_nan=False))
def test_partition_scale_always_matches_exactly_once(x):
    state = evaluate_scale(X3, {"x": x})
    expected = "neg" if x < 0 else ("low" if x < 10 else "high")
    assert state.id == expected


@given(st.integers(-100, 100), st.integers(-100, 100))
def test_order_correspondence(a, b):
    sa = evaluate_scale(X3, {"x": a})
    sb = evaluate_scale(X3, {"x": b})
    if sa.scale_position < sb.scale_position:
        assert a < b
