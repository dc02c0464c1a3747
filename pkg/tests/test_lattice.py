import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from silab.geometry import Measure, Rect, leq, union_measure, union_of, union_subset, strict_subset
from silab.lattice import (
    FlowError,
    build_flow,
    cell_measure_from_flow,
    consistent_numbering,
    diagonal_flow,
    extend_sequence,
    intersection_closure,
    is_strong_past_consistent,
    left_neighborhoods,
    random_lattice,
)

from oracles import subset_min_closure

LEB = Measure.lebesgue(2)
pts = st.lists(
    st.tuples(st.integers(1, 40), st.integers(1, 40)).map(lambda p: (p[0] / 4, p[1] / 4)), min_size=1, max_size=6, unique=True
)


def test_closure_example():
    lat = intersection_closure([Rect((1, 3)), Rect((2, 2))])
    assert {r.corner for r in lat.sets} == {(1.0, 3.0), (2.0, 2.0), (1.0, 2.0)}
    assert lat.minimal == Rect((1.0, 2.0))
    assert lat.is_closed()


def test_closure_rejects_mixed_dimension():
    with pytest.raises(ValueError):
        intersection_closure([Rect((1, 1)), Rect((1, 1, 1))])


@given(pts)
def test_closure_matches_subset_min(corners):
    lat = intersection_closure([Rect(c) for c in corners])
    assert {r.corner for r in lat.sets} == subset_min_closure(corners)


def test_numbering_example_and_cells():
    lat = intersection_closure([Rect((1, 3)), Rect((2, 2))])
    num = consistent_numbering(lat, LEB)
    assert [r.corner for r in num.ordered(lat)] == [(1.0, 2.0), (1.0, 3.0), (2.0, 2.0)]
    cells = left_neighborhoods(lat, num, LEB)
    assert cells.measures.tolist() == [2.0, 1.0, 2.0]
    assert cells.total() == 5.0


@given(pts)
def test_numbering_strong_past(corners):
    lat = intersection_closure([Rect(c) for c in corners])
    num = consistent_numbering(lat, LEB)
    assert is_strong_past_consistent(lat, num)
    ordered = num.ordered(lat)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            assert not (leq(b.corner, a.corner) and b != a)


def test_strong_past_detects_bad_order():
    from silab.lattice import Numbering

    lat = intersection_closure([Rect((1, 3)), Rect((2, 2))])
    bad = Numbering(tuple(reversed(consistent_numbering(lat, LEB).order)))
    assert not is_strong_past_consistent(lat, bad)


@settings(max_examples=60)
@given(pts)
def test_cells_conserve_measure(corners):
    lat = intersection_closure([Rect(c) for c in corners])
    cells = left_neighborhoods(lat, consistent_numbering(lat, LEB), LEB)
    assert abs(cells.total() - union_measure(union_of(*lat.sets), LEB)) <= 1e-9
    assert np.all(cells.measures >= 0)


def test_cells_match_grid_membership():
    # cell i = A_i minus earlier sets, counted on a fine grid
    rng = np.random.default_rng(2)
    raw = rng.integers(1, 513, size=(5, 2)) * (8 / 512)
    lat = intersection_closure([Rect(c) for c in raw])
    num = consistent_numbering(lat, LEB)
    h = 8 / 512
    c = (np.arange(512) + 0.5) * h
    seen = np.zeros((512, 512), dtype=bool)
    for cell, a in zip(left_neighborhoods(lat, num, LEB).cells, num.ordered(lat)):
        m = (c[:, None] <= a.corner[0]) & (c[None, :] <= a.corner[1])
        assert math.isclose(cell.measure, float((m & ~seen).sum()) * h * h, abs_tol=1e-9)
        seen |= m


def test_flow_hits_anchors_and_respects_mesh():
    lat = intersection_closure([Rect((1, 3)), Rect((2, 2))])
    num = consistent_numbering(lat, LEB)
    flow = build_flow(lat, num, LEB, 0.1)
    assert flow.set_at(0).is_empty or union_measure(flow.set_at(0), LEB) == 0.0
    assert flow.clock[0] == 0.0
    assert np.all(flow.steps() > 0) and flow.steps().max() <= 0.1 + 1e-12
    anchors = flow.anchor_sets()
    for pos, a in enumerate(num.ordered(lat)):
        assert union_subset(union_of(a), anchors[pos + 1])
    assert np.allclose(cell_measure_from_flow(flow), left_neighborhoods(lat, num, LEB).measures, atol=1e-12)
    sets = flow.sets
    for s0, s1 in zip(sets[:-1], sets[1:]):
        assert strict_subset(s0, s1)


def test_flow_step_uniformity():
    flow = diagonal_flow(1.0, 0.001)
    assert len(flow) == 1001
    assert np.allclose(flow.steps(), 0.001, rtol=1e-9)


def test_extend_sequence_validates():
    with pytest.raises(FlowError):
        extend_sequence([Rect((1, 1)), Rect((1, 1))], LEB, 0.1)
    with pytest.raises(FlowError):
        extend_sequence([Rect((0, 1))], LEB, 0.1)
    with pytest.raises(FlowError):
        extend_sequence([Rect((1, 1))], LEB, 0.0)
    flow = extend_sequence([Rect((1, 0.5)), Rect((1, 1))], LEB, 0.05)
    assert flow.anchor_alphas.tolist() == [0.0, 1.0, 2.0]
    assert math.isclose(flow.clock[-1], 1.0)


def test_separable_measure_flow():
    sq = Measure.separable([lambda x: x**2, lambda y: y**2])
    flow = extend_sequence([Rect((2, 2))], sq, 0.5)
    assert math.isclose(flow.clock[-1], 16.0)
    assert flow.steps().max() <= 0.5 * (1 + 1e-9)


def test_random_lattice_flows_conserve():
    rng = np.random.default_rng(0)
    for k in (1, 3, 6):
        lat = random_lattice(rng, k)
        num = consistent_numbering(lat, LEB)
        flow = build_flow(lat, num, LEB, 1.0)
        assert math.isclose(flow.clock[-1], union_measure(union_of(*lat.sets), LEB), rel_tol=1e-12)
