"""Finite subsemilattices of rectangles, strong-past numberings, left
neighborhoods and the discretized strictly increasing flows built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Corner,
    Measure,
    Rect,
    UnionSet,
    cmin,
    increment_measure,
    leq,
    strict_subset,
    union_canonicalize,
    union_measure,
    union_of,
    union_subset,
    union_with_rects_measure,
)

# bisection depth for locating interpolation parameters on the clock axis
_BISECT_ITERS = 64


class FlowError(ValueError):
    pass


@dataclass(frozen=True)
class Subsemilattice:
    sets: tuple[Rect, ...]

    def __len__(self) -> int:
        return len(self.sets)

    @property
    def dim(self) -> int:
        return self.sets[0].dim

    @property
    def minimal(self) -> Rect:
        corners = np.array([r.corner for r in self.sets])
        return Rect(corners.min(axis=0))

    def is_closed(self) -> bool:
        present = {r.corner for r in self.sets}
        return all(cmin(a.corner, b.corner) in present for a in self.sets for b in self.sets)


@dataclass(frozen=True)
class Numbering:
    order: tuple[int, ...]

    def ordered(self, lat: Subsemilattice) -> list[Rect]:
        return [lat.sets[i] for i in self.order]


@dataclass(frozen=True)
class Cell:
    position: int
    index: int
    base: Rect
    subtracted: UnionSet
    measure: float


@dataclass(frozen=True)
class CellDecomposition:
    cells: tuple[Cell, ...]

    @property
    def measures(self) -> np.ndarray:
        return np.array([c.measure for c in self.cells])

    def total(self) -> float:
        return float(math.fsum(c.measure for c in self.cells))


def intersection_closure(sets) -> Subsemilattice:
    rects = [s if isinstance(s, Rect) else Rect(s) for s in sets]
    if not rects:
        raise ValueError("intersection_closure needs at least one set")
    dims = {r.dim for r in rects}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    closed: set[Corner] = {r.corner for r in rects}
    frontier = set(closed)
    while frontier:
        fresh = {cmin(a, b) for a in frontier for b in closed} - closed
        closed |= fresh
        frontier = fresh
    return Subsemilattice(tuple(Rect(c) for c in sorted(closed)))


def consistent_numbering(lat: Subsemilattice, sigma: Measure) -> Numbering:
    """Order by measure, ties broken lexicographically.

    Strict inclusion forces strictly smaller measure, so every proper subset
    lands before its superset.
    """
    corners = [r.corner for r in lat.sets]
    if len(set(corners)) != len(corners):
        raise ValueError("duplicate sets in subsemilattice")
    measures = sigma.rect_many(np.array(corners))
    order = sorted(range(len(corners)), key=lambda i: (measures[i], corners[i]))
    return Numbering(tuple(order))


def is_strong_past_consistent(lat: Subsemilattice, num: Numbering) -> bool:
    ordered = num.ordered(lat)
    for i, a in enumerate(ordered):
        for j, b in enumerate(ordered):
            if b.corner != a.corner and leq(b.corner, a.corner) and j > i:
                return False
    return True


def left_neighborhoods(lat: Subsemilattice, num: Numbering, sigma: Measure) -> CellDecomposition:
    cells = []
    prefix = UnionSet()
    prev = 0.0
    for pos, idx in enumerate(num.order):
        a = lat.sets[idx]
        grown = union_of(prefix, a)
        total = union_measure(grown, sigma)
        cells.append(Cell(pos, idx, a, prefix, max(total - prev, 0.0)))
        prefix, prev = grown, total
    return CellDecomposition(tuple(cells))


@dataclass(frozen=True)
class Flow:
    """A discretized strictly increasing continuous sequence of unions.

    Point i is the set ``bases[base_ids[i]] | [0, moving[i]]``; the clock is
    its measure. ``anchor_alphas`` marks the parameters of the construction's
    anchor sets.
    """

    alphas: np.ndarray
    clock: np.ndarray
    base_ids: np.ndarray
    moving: np.ndarray
    bases: tuple[UnionSet, ...]
    mesh: float
    anchor_alphas: np.ndarray
    sigma: Measure = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.alphas)

    @property
    def dim(self) -> int:
        return self.moving.shape[1]

    def set_at(self, i: int) -> UnionSet:
        return union_of(self.bases[self.base_ids[i]], Rect(self.moving[i]))

    @property
    def sets(self) -> list[UnionSet]:
        return [self.set_at(i) for i in range(len(self))]

    def anchor_indices(self) -> np.ndarray:
        return np.searchsorted(self.alphas, self.anchor_alphas)

    def anchor_sets(self) -> list[UnionSet]:
        return [self.set_at(i) for i in self.anchor_indices()]

    @property
    def end_set(self) -> UnionSet:
        return self.set_at(len(self) - 1)

    def steps(self) -> np.ndarray:
        return np.diff(self.clock)

    def clock_pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.alphas.tolist(), self.clock.tolist()))


def _base_corner(base: UnionSet, target: Corner, sigma: Measure) -> np.ndarray:
    if base.is_empty:
        return np.zeros(len(target))
    mins = np.array([cmin(y, target) for y in base.corners])
    return mins[int(np.argmax(sigma.rect_many(mins)))]


def _grow(base: UnionSet, target: Corner, sigma: Measure, mesh: float):
    """Clock-uniform interpolation of base | [0, b + u (target - b)], u in (0, 1]."""
    b = _base_corner(base, target, sigma)
    t = np.asarray(target, dtype=float)
    theta0 = union_measure(base, sigma)
    theta1 = float(union_with_rects_measure(base, t[None, :], sigma)[0])
    delta = theta1 - theta0
    if not delta > 0:
        raise FlowError(f"interpolation stall: [0,{target}] adds no measure to {base.corners}")
    m = max(1, math.ceil(delta / mesh - 1e-12))
    targets = theta0 + delta * np.arange(1, m) / m
    lo, hi = np.zeros(m - 1), np.ones(m - 1)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        th = union_with_rects_measure(base, b + mid[:, None] * (t - b), sigma)
        below = th < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    us = np.concatenate([hi, [1.0]])
    corners = b + us[:, None] * (t - b)
    corners[-1] = t
    clocks = union_with_rects_measure(base, corners, sigma)
    clocks[-1] = theta1
    return us, corners, clocks


class _FlowBuilder:
    def __init__(self, dim: int, sigma: Measure, mesh: float):
        if not mesh > 0:
            raise FlowError(f"mesh must be positive, got {mesh}")
        if sigma.dim != dim:
            raise FlowError(f"measure is {sigma.dim}-d, sets are {dim}-d")
        self.sigma, self.mesh = sigma, mesh
        self.current = UnionSet()
        self.bases: list[UnionSet] = [UnionSet()]
        self.alphas = [0.0]
        self.clock = [0.0]
        self.base_ids = [0]
        self.moving = [np.zeros(dim)]
        self.anchor_alphas = [0.0]

    def segment(self, target: Corner, a0: float, a1: float):
        us, corners, clocks = _grow(self.current, target, self.sigma, self.mesh)
        bid = len(self.bases) - 1
        if self.bases[bid] != self.current:
            self.bases.append(self.current)
            bid += 1
        alphas = a0 + us * (a1 - a0)
        alphas[-1] = a1
        self.alphas.extend(alphas.tolist())
        self.clock.extend(clocks.tolist())
        self.base_ids.extend([bid] * len(us))
        self.moving.extend(corners)
        self.current = union_of(self.current, Rect(target))

    def anchor(self, alpha: float):
        self.anchor_alphas.append(alpha)

    def finish(self) -> Flow:
        flow = Flow(
            alphas=np.array(self.alphas),
            clock=np.array(self.clock),
            base_ids=np.array(self.base_ids, dtype=np.int64),
            moving=np.array(self.moving),
            bases=tuple(self.bases),
            mesh=self.mesh,
            anchor_alphas=np.array(self.anchor_alphas),
            sigma=self.sigma,
        )
        check_flow(flow)
        return flow


def check_flow(flow: Flow) -> None:
    """Assert strict growth and mesh continuity step by step."""
    steps = np.diff(flow.clock)
    if np.any(np.diff(flow.alphas) <= 0):
        raise FlowError("flow parameters are not strictly increasing")
    if np.any(steps <= 0):
        raise FlowError(f"interpolation stall at step {int(np.argmin(steps))}")
    if steps.size and steps.max() > flow.mesh * (1 + 1e-9):
        raise FlowError(f"clock step {steps.max()} exceeds mesh {flow.mesh}")


def build_flow(lat: Subsemilattice, num: Numbering, sigma: Measure, mesh: float) -> Flow:
    """Flow from the minimal set [0, 0] through every f(i) = A_0 | ... | A_i.

    f(i) sits at parameter i + 1, so the cell of position i is the set grown
    over [i, i + 1].
    """
    builder = _FlowBuilder(lat.dim, sigma, mesh)
    for pos, idx in enumerate(num.order):
        builder.segment(lat.sets[idx].corner, float(pos), float(pos + 1))
        builder.anchor(float(pos + 1))
    return builder.finish()


def extend_sequence(anchors, sigma: Measure, mesh: float) -> Flow:
    """Strictly increasing flow passing through anchor n at parameter n (n >= 1)."""
    anchors = [a if isinstance(a, UnionSet) else union_of(a) for a in anchors]
    if not anchors:
        raise ValueError("extend_sequence needs at least one anchor")
    if anchors[0].is_empty or sigma.rect_many(np.array(anchors[0].corners)).max() <= 0:
        raise FlowError("first anchor must have positive measure")
    for n in range(1, len(anchors)):
        if not strict_subset(anchors[n - 1], anchors[n]):
            raise FlowError(f"anchor {n + 1} does not strictly contain anchor {n}")
    builder = _FlowBuilder(anchors[0].dim, sigma, mesh)
    for n, a in enumerate(anchors):
        fresh = [c for c in a.corners if not union_subset(union_canonicalize([c]), builder.current)]
        fresh.sort(key=lambda c: (sigma.rect(c), c))
        width = 1.0 / len(fresh)
        for j, c in enumerate(fresh):
            builder.segment(c, n + j * width, n + 1.0 if j == len(fresh) - 1 else n + (j + 1) * width)
        builder.anchor(float(n + 1))
    return builder.finish()


def clock(flow: Flow) -> list[tuple[float, float]]:
    return flow.clock_pairs()


def cell_measure_from_flow(flow: Flow) -> np.ndarray:
    """Clock differences between consecutive anchors."""
    return np.diff(flow.clock[flow.anchor_indices()])


def diagonal_flow(sigma_end: float, mesh: float, sigma: Measure | None = None) -> Flow:
    """Flow along [0, (t, t)] up to clock sigma_end (Lebesgue by default)."""
    sigma = sigma or Measure.lebesgue(2)
    if not sigma.is_lebesgue:
        raise ValueError("diagonal_flow assumes a Lebesgue measure")
    side = math.sqrt(sigma_end / sigma.scale)
    return extend_sequence([Rect((side, side))], sigma, mesh)


def random_lattice(rng: np.random.Generator, k: int, upper: float = 10.0) -> Subsemilattice:
    """Closure of k uniform random corners in (0, upper]^2."""
    pts = rng.uniform(0.0, upper, size=(k, 2))
    pts = np.maximum(pts, upper * 1e-3)
    return intersection_closure([Rect(p) for p in pts])


__all__ = [
    "Cell",
    "CellDecomposition",
    "Flow",
    "FlowError",
    "Numbering",
    "Subsemilattice",
    "build_flow",
    "cell_measure_from_flow",
    "check_flow",
    "clock",
    "consistent_numbering",
    "diagonal_flow",
    "extend_sequence",
    "increment_measure",
    "intersection_closure",
    "is_strong_past_consistent",
    "left_neighborhoods",
    "random_lattice",
]
