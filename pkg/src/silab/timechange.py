"""Clock inversion and retiming of projected paths.

The clock of a flow is theta(alpha) = sigma(A_alpha). Its inverse pi reindexes
the projected path so that the set reached at new time t has measure t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .processes import PathSample

ROUND_TRIP_TOL = 1e-9


class ClockError(ValueError):
    pass


@dataclass(frozen=True)
class TimeChange:
    """Monotone piecewise-linear bijection from clock values to flow parameters."""

    theta: np.ndarray
    alpha: np.ndarray

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.theta[0]), float(self.theta[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        span = max(abs(lo), abs(hi), 1.0)
        if np.any(t < lo - 1e-12 * span) or np.any(t > hi + 1e-12 * span):
            raise ClockError(f"time outside the clock range [{lo}, {hi}]")
        return np.interp(t, self.theta, self.alpha)

    def forward(self, a):
        """The clock itself, theta(alpha)."""
        return np.interp(np.asarray(a, dtype=float), self.alpha, self.theta)

    def compose(self, other: "TimeChange") -> "TimeChange":
        """self after other, evaluated on the knots of other."""
        return TimeChange(other.theta, self(other.alpha))


def invert_clock(clock) -> TimeChange:
    pairs = np.asarray(clock, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or len(pairs) < 2:
        raise ClockError("clock must be a list of at least two (alpha, theta) pairs")
    alpha, theta = pairs[:, 0], pairs[:, 1]
    if np.any(np.diff(alpha) <= 0):
        raise ClockError("clock parameters must be strictly increasing")
    if np.any(np.diff(theta) <= 0):
        raise ClockError("clock is not strictly increasing; the measure is not strictly monotone along this flow")
    return TimeChange(theta.copy(), alpha.copy())


def retime(path: PathSample, tc: TimeChange, step: float) -> PathSample:
    """Read Y on the uniform clock grid 0, step, 2 step, ... by index lookup.

    Each grid time t picks the last flow point whose parameter does not exceed
    pi(t); values are never interpolated. The returned clock holds the exact
    measures of the selected sets, so increment variances are the recorded
    clock differences.
    """
    lo, hi = tc.domain
    if not step > 0:
        raise ClockError("retime step must be positive")
    if step > hi - lo:
        raise ClockError(f"step {step} exceeds the clock range {hi - lo}")
    if np.max(np.diff(path.clock)) > step:
        raise ClockError("retime step is finer than the flow mesh; grid points would repeat")
    k = int(np.floor((hi - lo) / step * (1 + 1e-12)))
    grid = lo + step * np.arange(k + 1)
    grid = np.minimum(grid, hi)
    targets = tc(grid)
    idx = np.searchsorted(path.alphas, targets * (1 + 1e-13) + 1e-300, side="right") - 1
    idx = np.clip(idx, 0, len(path.alphas) - 1)
    if np.any(np.diff(idx) <= 0):
        raise ClockError("retimed grid is not strictly increasing")
    return PathSample(path.alphas[idx], path.clock[idx], path.cumulative[idx], grid=grid, flow=path.flow)
