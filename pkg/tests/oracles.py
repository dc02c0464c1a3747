"""Brute-force references, kept independent of the code paths they check."""

import itertools
import math

import numpy as np


def grid_union_area(corners, upper: float, res: int = 2048) -> float:
    """Lebesgue area of a union of [0, c] by counting cell centres on a res x res grid.

    Exact when every corner coordinate is a multiple of upper / res.
    """
    h = upper / res
    centres = (np.arange(res) + 0.5) * h
    inside = np.zeros((res, res), dtype=bool)
    for cx, cy in corners:
        inside |= (centres[:, None] <= cx) & (centres[None, :] <= cy)
    return float(inside.sum()) * h * h


def subset_min_closure(corners) -> set:
    """Componentwise minima over every nonempty subset."""
    out = set()
    pts = [tuple(map(float, c)) for c in corners]
    for size in range(1, len(pts) + 1):
        for combo in itertools.combinations(pts, size):
            out.add(tuple(min(v) for v in zip(*combo)))
    return out


def cell_sum(values: np.ndarray, tmax: float, a, exclusions) -> float:
    """Correctly rounded sum of the cells inside a but outside every exclusion."""
    n = values.shape[0]
    idx = np.arange(n)

    def snap(x):
        return min(n, int(math.floor(x * n / tmax + 1e-9)))

    def mask(c):
        return (idx[:, None] < snap(c[0])) & (idx[None, :] < snap(c[1]))

    m = mask(a)
    for e in exclusions:
        m &= ~mask(e)
    return math.fsum(values[m].tolist())


def bridge_max_exceeds(y0, y1, level, dt, rng, n_sub=2000, reps=20000):
    """Monte Carlo of a Brownian bridge from y0 to y1 over dt reaching level."""
    t = np.linspace(0.0, dt, n_sub + 1)
    w = np.concatenate([np.zeros((reps, 1)), np.cumsum(rng.normal(0, math.sqrt(dt / n_sub), (reps, n_sub)), axis=1)], axis=1)
    bridge = y0 + w - (t / dt) * (w[:, -1:]) + (t / dt) * (y1 - y0)
    return float(np.mean(bridge.max(axis=1) >= level))
