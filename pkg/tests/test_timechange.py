import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from silab.geometry import Measure, Rect
from silab.lattice import diagonal_flow, extend_sequence
from silab.processes import ProcessModel, sample_path
from silab.timechange import ClockError, invert_clock, retime

increments = st.lists(st.floats(0.01, 5.0), min_size=1, max_size=30)


@given(increments)
def test_round_trip(steps):
    alpha = np.arange(len(steps) + 1, dtype=float)
    theta = np.concatenate([[0.0], np.cumsum(steps)])
    tc = invert_clock(list(zip(alpha, theta)))
    t = np.linspace(0, theta[-1], 57)
    assert np.allclose(tc.forward(tc(t)), t, atol=1e-9 * max(1.0, theta[-1]))
    assert np.allclose(tc(theta), alpha, atol=1e-9 * len(alpha))


def test_flat_clock_rejected():
    with pytest.raises(ClockError):
        invert_clock([(0, 0), (1, 1), (2, 1)])
    with pytest.raises(ClockError):
        invert_clock([(0, 0)])


def test_out_of_range():
    tc = invert_clock([(0, 0), (1, 2)])
    with pytest.raises(ClockError):
        tc(2.5)


def test_compose_identity():
    tc = invert_clock([(0, 0), (1, 2), (2, 3)])
    ident = invert_clock([(0, 0), (3, 3)])
    assert np.allclose(tc.compose(ident).alpha, tc(ident.alpha))


def test_retime_unit_rate_grid():
    flow = extend_sequence([Rect((1, 0.5)), Rect((2, 2))], Measure.lebesgue(2), 0.005)
    path = sample_path(ProcessModel.sibm(), flow, seed=3)
    out = retime(path, invert_clock(flow.clock_pairs()), 0.01)
    assert np.allclose(out.grid, 0.01 * np.arange(len(out.grid)))
    # the selected set never overshoots its grid time and lags by at most one flow step
    assert np.all(out.clock <= out.grid + 1e-9)
    assert np.all(out.grid - out.clock <= 0.005 + 1e-9)
    assert set(out.cumulative.tolist()) <= set(path.cumulative.tolist())


def test_retime_errors():
    flow = diagonal_flow(1.0, 0.01)
    path = sample_path(ProcessModel.sibm(), flow, seed=1)
    tc = invert_clock(flow.clock_pairs())
    with pytest.raises(ClockError):
        retime(path, tc, 2.0)
    with pytest.raises(ClockError):
        retime(path, tc, 0.001)
    with pytest.raises(ClockError):
        retime(path, tc, 0.0)
