import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from silab.geometry import Measure, Rect, union_canonicalize
from silab.lattice import diagonal_flow, extend_sequence
from silab.processes import (
    ProcessModel,
    block_chunks,
    blocks,
    evaluate_increment,
    evaluate_set,
    field_to_csv,
    project_path,
    sample_field,
    sample_path,
    snapped_measure,
)

from oracles import cell_sum

LEB = Measure.lebesgue(2)


def test_model_validation():
    with pytest.raises(ValueError):
        ProcessModel("brownian")
    with pytest.raises(ValueError):
        ProcessModel.poisson(0.0)
    assert ProcessModel.poisson(2.0).bracket_rate() == 2.0
    assert ProcessModel.sibm().bracket_rate() == 1.0


def test_path_is_reproducible_and_replicates_differ():
    flow = diagonal_flow(1.0, 0.01)
    a = sample_path(ProcessModel.sibm(), flow, seed=4, replicate=2)
    b = sample_path(ProcessModel.sibm(), flow, seed=4, replicate=2)
    c = sample_path(ProcessModel.sibm(), flow, seed=4, replicate=3)
    assert np.array_equal(a.cumulative, b.cumulative)
    assert not np.array_equal(a.cumulative, c.cumulative)
    assert a.cumulative[0] == 0.0


def test_path_variance_matches_clock():
    flow = extend_sequence([Rect((1, 0.5)), Rect((2, 1))], LEB, 0.05)
    ends = np.array([sample_path(ProcessModel.sibm(), flow, seed=1, replicate=r).cumulative[-1] for r in range(4000)])
    # var of the end value is sigma(end set) = 2; sd of the sample variance ~ 2 sqrt(2 / n)
    assert abs(ends.var() - 2.0) < 4 * 2 * math.sqrt(2 / 4000)


def test_poisson_path_variance():
    flow = diagonal_flow(1.0, 0.01)
    ends = np.array([sample_path(ProcessModel.poisson(2.0), flow, seed=1, replicate=r).cumulative[-1] for r in range(4000)])
    assert abs(ends.mean()) < 4 * math.sqrt(2.0 / 4000)
    assert abs(ends.var() - 2.0) < 0.25


@pytest.mark.parametrize("kind", ["sibm", "poisson", "common", "skew"])
def test_block_chunking_invariant(kind):
    model = ProcessModel(kind, 1.5)
    dth = np.full(300, 0.01)
    small = np.concatenate([i for _, i, _ in block_chunks(model, dth, 7, 1, 50, chunk=7)], axis=1)
    big = np.concatenate([i for _, i, _ in block_chunks(model, dth, 7, 1, 50, chunk=128)], axis=1)
    assert np.array_equal(small, big)
    # a smaller block is a prefix of a larger one
    wide = np.concatenate([i for _, i, _ in block_chunks(model, dth, 7, 1, 80)], axis=1)
    assert np.array_equal(wide[:50], big)


def test_blocks_cover_replicates():
    assert blocks(1) == [(0, 1)]
    assert sum(s for _, s in blocks(100_000)) == 100_000


def test_field_additivity_against_cell_oracle():
    f = sample_field(ProcessModel.sibm(), 64, 1.0, LEB, seed=2)
    rng = np.random.default_rng(0)
    v = f.values
    for _ in range(100):
        a = Rect(rng.integers(1, 65, size=2) / 64)
        ex = [Rect(rng.integers(1, 65, size=2) / 64) for _ in range(int(rng.integers(0, 4)))]
        assert evaluate_increment(f, a, ex) == cell_sum(v, 1.0, a.corner, [e.corner for e in ex])


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 32), st.integers(0, 32)), min_size=1, max_size=5))
def test_union_evaluation_matches_cells(idx):
    f = sample_field(ProcessModel.poisson(1.0), 32, 2.0, LEB, seed=5)
    u = union_canonicalize([(i / 16, j / 16) for i, j in idx])
    mask = np.zeros((32, 32), dtype=bool)
    for i, j in idx:
        mask[:i, :j] = True
    assert evaluate_set(f, u) == math.fsum(f.values[mask].tolist())


def test_field_empty_set_and_domain():
    f = sample_field(ProcessModel.sibm(), 16, 1.0, LEB, seed=0)
    assert evaluate_set(f, union_canonicalize([])) == 0.0
    assert evaluate_set(f, Rect((0.0, 0.0))) == 0.0
    with pytest.raises(ValueError):
        evaluate_set(f, Rect((2.0, 0.5)))
    with pytest.raises(ValueError):
        sample_field(ProcessModel.sibm(), 0, 1.0, LEB, seed=0)


def test_field_cell_variance():
    f = sample_field(ProcessModel.sibm(), 256, 1.0, LEB, seed=1)
    z = f.values / math.sqrt(1 / 256**2)
    assert abs(z.var() - 1) < 0.03
    # unit cells so each carries Poisson mean 2
    g = sample_field(ProcessModel.poisson(2.0), 128, 128.0, LEB, seed=1)
    assert abs(g.values.mean()) < 4 * math.sqrt(2.0 / 128**2)
    assert abs(g.values.var() / 2.0 - 1) < 0.05


def test_snapped_measure_floor():
    f = sample_field(ProcessModel.sibm(), 10, 1.0, LEB, seed=0)
    assert math.isclose(snapped_measure(f, Rect((0.55, 0.31))), 0.5 * 0.3)


def test_project_path_consistent_with_field():
    f = sample_field(ProcessModel.sibm(), 32, 1.0, LEB, seed=3)
    flow = extend_sequence([Rect((1, 0.5)), Rect((1, 1))], LEB, 0.05)
    p = project_path(f, flow)
    for i in (0, len(flow) // 2, len(flow) - 1):
        assert p.cumulative[i] == evaluate_set(f, flow.set_at(i))
    assert p.cumulative[-1] == math.fsum(f.values.ravel().tolist())


def test_field_csv(tmp_path):
    f = sample_field(ProcessModel.sibm(), 4, 1.0, LEB, seed=0)
    out = tmp_path / "f.csv"
    field_to_csv(f, out)
    assert np.allclose(np.loadtxt(out, delimiter=","), f.values)
