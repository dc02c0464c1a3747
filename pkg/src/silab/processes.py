"""Samplers for set-indexed processes.

Path mode draws the exact increment series along a flow: each flow step is a
disjoint cell with measure equal to the clock step. Field mode draws one value
per cell of a regular n x n grid and evaluates sets by summing the cells under
their floor-snapped staircase.

Field values are held as int64 multiples of a power-of-two quantum, so every
set evaluation is an exact integer sum. Additivity and inclusion-exclusion
identities then hold bit for bit, whatever the summation order.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.special import ndtri

from . import streams
from .geometry import Measure, Rect, UnionSet, as_union, cmin, union_canonicalize, union_measure
from .lattice import Flow

SIBM = "sibm"
POISSON = "poisson"
COMMON_FACTOR = "common"
VARIANCE_SKEW = "skew"
KINDS = (SIBM, POISSON, COMMON_FACTOR, VARIANCE_SKEW)

# stream labels
_PATH, _PATH_FACTOR, _FIELD, _FIELD_FACTOR, _BATCH = 1, 2, 3, 4, 5

BLOCK = 1024
CHUNK = 128


@dataclass(frozen=True)
class ProcessModel:
    kind: str = SIBM
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown process kind {self.kind!r}; expected one of {KINDS}")
        if not self.lam > 0:
            raise ValueError(f"rate must be positive, got {self.lam}")

    @classmethod
    def sibm(cls) -> "ProcessModel":
        return cls(SIBM)

    @classmethod
    def poisson(cls, lam: float) -> "ProcessModel":
        return cls(POISSON, lam)

    @classmethod
    def common_factor(cls) -> "ProcessModel":
        return cls(COMMON_FACTOR)

    @classmethod
    def variance_skew(cls) -> "ProcessModel":
        return cls(VARIANCE_SKEW)

    def bracket_rate(self) -> float:
        """Expected quadratic variation per unit of measure."""
        return self.lam if self.kind == POISSON else 1.0

    def cell_values(self, u: np.ndarray, measures: np.ndarray, factor: float | np.ndarray = 0.0) -> np.ndarray:
        """Map uniforms to cell values for cells of the given measures."""
        if self.kind == SIBM:
            return ndtri(u) * np.sqrt(measures)
        if self.kind == POISSON:
            mean = self.lam * measures
            return streams.poisson_inverse(u, mean) - mean
        if self.kind == COMMON_FACTOR:
            return factor * measures
        return ndtri(u) * measures


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map; results do not depend on ``workers``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- path mode --------------------------------------------------------------


@dataclass(frozen=True)
class PathSample:
    """Values Y at flow points; ``cumulative[0]`` is the value on the start set."""

    alphas: np.ndarray
    clock: np.ndarray
    cumulative: np.ndarray
    grid: np.ndarray | None = None
    flow: Flow | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.cumulative)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.cumulative)

    @property
    def dtheta(self) -> np.ndarray:
        return np.diff(self.clock)

    def with_values(self, values: np.ndarray) -> "PathSample":
        return PathSample(self.alphas, self.clock, np.asarray(values, dtype=float), self.grid, self.flow)


def path_increments(model: ProcessModel, dtheta: np.ndarray, seed: int, replicate: int = 0) -> np.ndarray:
    dtheta = np.asarray(dtheta, dtype=float)
    u = streams.uniforms(seed, (_PATH, replicate), 0, dtheta.size)
    factor = 0.0
    if model.kind == COMMON_FACTOR:
        factor = float(streams.normals(seed, (_PATH_FACTOR, replicate), 0, 1)[0])
    return model.cell_values(u, dtheta, factor)


def sample_path(model: ProcessModel, flow: Flow, seed: int, replicate: int = 0) -> PathSample:
    inc = path_increments(model, flow.steps(), seed, replicate)
    cumulative = np.concatenate([[0.0], np.cumsum(inc)])
    return PathSample(flow.alphas, flow.clock, cumulative, flow=flow)


def sample_bm_path(flow: Flow, seed: int, replicate: int = 0) -> PathSample:
    return sample_path(ProcessModel.sibm(), flow, seed, replicate)


def block_chunks(
    model: ProcessModel,
    dtheta: np.ndarray,
    seed: int,
    block: int,
    size: int,
    chunk: int = CHUNK,
    bridge: bool = False,
) -> Iterator[tuple[int, np.ndarray, np.ndarray | None]]:
    """Increments for replicates [block * BLOCK, block * BLOCK + size), chunk by chunk.

    Yields ``(start, increments, uniforms)`` with arrays of shape (size, c)
    covering steps [start, start + c). Step s of column r is draw
    s * BLOCK + r of the block's stream, so chunking never changes a value.
    """
    dtheta = np.asarray(dtheta, dtype=float)
    factor = 0.0
    if model.kind == COMMON_FACTOR:
        factor = streams.normals(seed, (_BATCH, block, 2), 0, size)[:, None]
    for start in range(0, dtheta.size, chunk):
        c = min(chunk, dtheta.size - start)
        u = streams.uniforms(seed, (_BATCH, block, 0), start * BLOCK, c * BLOCK)
        u = u.reshape(c, BLOCK)[:, :size].T
        inc = model.cell_values(u, dtheta[None, start : start + c], factor)
        ub = None
        if bridge:
            ub = streams.uniforms(seed, (_BATCH, block, 1), start * BLOCK, c * BLOCK)
            ub = ub.reshape(c, BLOCK)[:, :size].T
        yield start, np.broadcast_to(inc, (size, c)), ub


def blocks(n_replicates: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK, n_replicates - b * BLOCK)) for b in range(math.ceil(n_replicates / BLOCK))]


# --- field mode -------------------------------------------------------------


def _quantum(values: np.ndarray) -> float:
    bound = float(np.sum(np.abs(values)))
    if bound == 0:
        return 1.0
    # partial sums stay below 2**50 quanta, well inside exact float range
    return 2.0 ** (math.ceil(math.log2(bound)) - 50)


@dataclass(frozen=True)
class FieldSample:
    n: int
    tmax: float
    sigma: Measure
    model: ProcessModel
    seed: int
    replicate: int
    ints: np.ndarray = field(repr=False)
    quantum: float
    cell_measures: np.ndarray = field(repr=False)

    @property
    def values(self) -> np.ndarray:
        return self.ints.astype(np.float64) * self.quantum

    @property
    def prefix(self) -> np.ndarray:
        p = np.zeros((self.n + 1, self.n + 1), dtype=np.int64)
        p[1:, 1:] = self.ints.cumsum(axis=0).cumsum(axis=1)
        return p

    @property
    def h(self) -> float:
        return self.tmax / self.n

    def snap_index(self, x: float) -> int:
        if x > self.tmax * (1 + 1e-12):
            raise ValueError(f"coordinate {x} lies outside the domain [0, {self.tmax}]")
        return min(self.n, int(math.floor(x * self.n / self.tmax + 1e-9)))


def grid_cell_measures(n: int, tmax: float, sigma: Measure) -> np.ndarray:
    lines = np.linspace(0.0, tmax, n + 1)
    wx = np.diff(sigma.axis(0, lines))
    wy = np.diff(sigma.axis(1, lines))
    return sigma.scale * np.outer(wx, wy)


def sample_field(
    model: ProcessModel, n: int, tmax: float, sigma: Measure, seed: int, replicate: int = 0
) -> FieldSample:
    if n < 1:
        raise ValueError("grid size must be >= 1")
    if sigma.dim != 2:
        raise ValueError("field mode is two-dimensional")
    measures = grid_cell_measures(n, tmax, sigma)
    u = streams.uniforms(seed, (_FIELD, replicate), 0, n * n).reshape(n, n)
    factor = 0.0
    if model.kind == COMMON_FACTOR:
        factor = float(streams.normals(seed, (_FIELD_FACTOR, replicate), 0, 1)[0])
    values = model.cell_values(u, measures, factor)
    q = _quantum(values)
    ints = np.rint(values / q).astype(np.int64)
    return FieldSample(n, float(tmax), sigma, model, int(seed), int(replicate), ints, q, measures)


def _snapped_indices(field_: FieldSample, u: UnionSet) -> list[tuple[int, int]]:
    idx = {(field_.snap_index(c[0]), field_.snap_index(c[1])) for c in u.corners}
    idx = {p for p in idx if p[0] > 0 and p[1] > 0}
    keep = [p for p in idx if not any(p != q and p[0] <= q[0] and p[1] <= q[1] for q in idx)]
    return sorted(keep)


def _staircase_int(prefix: np.ndarray, idx: list[tuple[int, int]]) -> int:
    total = 0
    left = 0
    for ix, iy in idx:
        total += int(prefix[ix, iy]) - int(prefix[left, iy])
        left = ix
    return total


def _as_set(u) -> UnionSet:
    if isinstance(u, UnionSet):
        return u
    return as_union(u)


def evaluate_set_int(field_: FieldSample, u, prefix: np.ndarray | None = None) -> int:
    u = _as_set(u)
    if u.is_empty:
        return 0
    if prefix is None:
        prefix = field_.prefix
    return _staircase_int(prefix, _snapped_indices(field_, u))


def evaluate_set(field_: FieldSample, u, prefix: np.ndarray | None = None) -> float:
    """Sum of the cells lying inside the floor-snapped set; X of the empty set is 0."""
    return evaluate_set_int(field_, u, prefix) * field_.quantum


def _grid_measure(idx: list[tuple[int, int]], h: float, sigma: Measure) -> float:
    if not idx:
        return 0.0
    return union_measure(union_canonicalize((i * h, j * h) for i, j in idx), sigma)


def snapped_measure(field_: FieldSample, u) -> float:
    return _grid_measure(_snapped_indices(field_, _as_set(u)), field_.h, field_.sigma)


def evaluate_increment(field_: FieldSample, a: Rect, exclusions: Sequence[Rect]) -> float:
    """X on a minus the union of exclusions, by inclusion-exclusion over intersections."""
    if len(exclusions) > 12:
        raise ValueError("at most 12 exclusions (2**n inclusion-exclusion terms)")
    prefix = field_.prefix
    total = 0
    for size in range(len(exclusions) + 1):
        sign = -1 if size % 2 else 1
        for combo in itertools.combinations(exclusions, size):
            corner = a.corner
            for r in combo:
                corner = cmin(corner, r.corner)
            total += sign * evaluate_set_int(field_, Rect(corner), prefix)
    return total * field_.quantum


@dataclass(frozen=True)
class SnappedFlow:
    """Grid-snapped staircases of every flow point, precomputed for reuse."""

    point: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    left: np.ndarray
    clock: np.ndarray
    alphas: np.ndarray
    flow: Flow = field(repr=False)


def snap_flow(flow: Flow, n: int, tmax: float, sigma: Measure) -> SnappedFlow:
    proto = FieldSample(n, tmax, sigma, ProcessModel(), 0, 0, np.zeros((n, n), np.int64), 1.0, None)
    point, ix, iy, left, clock = [], [], [], [], []
    cache: dict = {}
    for i in range(len(flow)):
        idx = _snapped_indices(proto, flow.set_at(i))
        key = tuple(idx)
        if key not in cache:
            cache[key] = _grid_measure(idx, tmax / n, sigma)
        clock.append(cache[key])
        prev = 0
        for a, b in idx:
            point.append(i)
            ix.append(a)
            iy.append(b)
            left.append(prev)
            prev = a
    return SnappedFlow(
        np.array(point, dtype=np.int64),
        np.array(ix, dtype=np.int64),
        np.array(iy, dtype=np.int64),
        np.array(left, dtype=np.int64),
        np.array(clock),
        flow.alphas,
        flow,
    )


def project_snapped(field_: FieldSample, snapped: SnappedFlow) -> PathSample:
    prefix = field_.prefix
    terms = prefix[snapped.ix, snapped.iy] - prefix[snapped.left, snapped.iy]
    sums = np.zeros(len(snapped.alphas), dtype=np.int64)
    np.add.at(sums, snapped.point, terms)
    return PathSample(snapped.alphas, snapped.clock, sums * field_.quantum, flow=snapped.flow)


def project_path(field_: FieldSample, flow: Flow) -> PathSample:
    """Y at every flow point; the clock is the measure of the snapped sets."""
    last = flow.moving.max(axis=0)
    if np.any(last > field_.tmax * (1 + 1e-12)):
        raise ValueError("flow leaves the field domain")
    return project_snapped(field_, snap_flow(flow, field_.n, field_.tmax, field_.sigma))


def field_to_csv(field_: FieldSample, path) -> None:
    np.savetxt(path, field_.values, delimiter=",")
