"""Rectangles [0, x] in the positive orthant, their finite unions and measures.

A finite union of rectangles anchored at the origin is a staircase lower set.
It is stored canonically as the antichain of its maximal corners, sorted
lexicographically, which makes equality of regions equality of tuples.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

Corner = tuple[float, ...]

MEASURE_ATOL = 1e-12
IE_CORNER_CAP = 20


class DimensionError(ValueError):
    pass


def _corner(coords: Iterable[float]) -> Corner:
    c = tuple(float(v) for v in coords)
    if not c:
        raise DimensionError("corner must have at least one coordinate")
    if any(not math.isfinite(v) or v < 0 for v in c):
        raise ValueError(f"corner coordinates must be finite and >= 0, got {c}")
    return c


def _check_dims(*corners: Sequence[float]) -> int:
    dims = {len(c) for c in corners}
    if len(dims) > 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop() if dims else 0


def leq(x: Sequence[float], y: Sequence[float]) -> bool:
    """Componentwise x <= y."""
    return all(a <= b for a, b in zip(x, y))


def cmin(x: Sequence[float], y: Sequence[float]) -> Corner:
    return tuple(min(a, b) for a, b in zip(x, y))


@dataclass(frozen=True)
class Rect:
    """The rectangle [0, corner]; the zero corner is the minimal set."""

    corner: Corner

    def __post_init__(self):
        object.__setattr__(self, "corner", _corner(self.corner))

    @classmethod
    def empty_prime(cls, dim: int = 2) -> "Rect":
        return cls((0.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def is_degenerate(self) -> bool:
        return any(v == 0 for v in self.corner)

    def within(self, other: "Rect") -> bool:
        _check_dims(self.corner, other.corner)
        return leq(self.corner, other.corner)


@dataclass(frozen=True)
class UnionSet:
    """Finite union of rectangles, held as a sorted antichain of corners.

    Build instances through :func:`union_canonicalize`; the constructor
    assumes the corners are already canonical. An empty tuple is the empty set.
    """

    corners: tuple[Corner, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.corners[0]) if self.corners else 0

    @property
    def is_empty(self) -> bool:
        return not self.corners

    def rects(self) -> list[Rect]:
        return [Rect(c) for c in self.corners]

    def to_json(self) -> dict:
        return {"corners": [list(c) for c in self.corners]}


@dataclass(frozen=True)
class IncrementSet:
    """base minus subtracted; an element of the class C."""

    base: Rect
    subtracted: UnionSet = field(default_factory=UnionSet)


def rect_intersect(a: Rect, b: Rect) -> Rect:
    _check_dims(a.corner, b.corner)
    return Rect(cmin(a.corner, b.corner))


def union_canonicalize(corners: Iterable[Sequence[float]]) -> UnionSet:
    cs = sorted({_corner(c) for c in corners})
    _check_dims(*cs)
    keep = [c for c in cs if not any(c != o and leq(c, o) for o in cs)]
    return UnionSet(tuple(keep))


def as_union(obj: Rect | UnionSet | Sequence[float]) -> UnionSet:
    if isinstance(obj, UnionSet):
        return obj
    if isinstance(obj, Rect):
        return UnionSet((obj.corner,))
    return union_canonicalize([obj])


def union_of(*sets: Rect | UnionSet) -> UnionSet:
    corners: list[Corner] = []
    for s in sets:
        corners.extend(as_union(s).corners)
    return union_canonicalize(corners)


def union_intersect(u1: UnionSet, u2: UnionSet) -> UnionSet:
    _check_dims(*(u1.corners[:1] + u2.corners[:1]))
    return union_canonicalize(cmin(a, b) for a in u1.corners for b in u2.corners)


def union_contains(u: UnionSet, r: Rect) -> bool:
    if u.corners:
        _check_dims(u.corners[0], r.corner)
    return any(leq(r.corner, c) for c in u.corners)


def union_subset(u1: UnionSet, u2: UnionSet) -> bool:
    if u1.corners and u2.corners:
        _check_dims(u1.corners[0], u2.corners[0])
    return all(any(leq(c, o) for o in u2.corners) for c in u1.corners)


def strict_subset(u1: UnionSet, u2: UnionSet) -> bool:
    return u1 != u2 and union_subset(u1, u2)


# --- measures -------------------------------------------------------------


def _identity(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Measure:
    """Product measure with one cumulative weight function per axis.

    ``cdfs[m](x)`` is the weight of [0, x] along axis m; it must vanish at 0
    and be strictly increasing, which makes the product strictly monotone on
    nondegenerate rectangles. ``cdfs`` of ``None`` means Lebesgue.
    """

    dim: int
    cdfs: tuple[Callable[[np.ndarray], np.ndarray], ...] | None = None
    scale: float = 1.0
    name: str = "lebesgue"

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError("measure dimension must be >= 1")
        if self.scale <= 0:
            raise ValueError("measure scale must be positive")
        if self.cdfs is not None and len(self.cdfs) != self.dim:
            raise DimensionError("need one cumulative weight function per axis")
        if self.cdfs is not None:
            probe = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 8.0])
            for f in self.cdfs:
                w = np.asarray(f(probe), dtype=float)
                if w[0] != 0 or np.any(np.diff(w) <= 0):
                    raise ValueError("axis weight must vanish at 0 and be strictly increasing")

    @classmethod
    def lebesgue(cls, dim: int = 2, scale: float = 1.0) -> "Measure":
        name = "lebesgue" if scale == 1.0 else f"lebesgue*{scale:g}"
        return cls(dim=dim, scale=scale, name=name)

    @classmethod
    def separable(cls, cdfs: Sequence[Callable], name: str = "separable") -> "Measure":
        return cls(dim=len(cdfs), cdfs=tuple(cdfs), name=name)

    @property
    def is_lebesgue(self) -> bool:
        return self.cdfs is None

    def axis(self, m: int, x):
        """Cumulative axis weight, vectorized."""
        if self.cdfs is None:
            return _identity(x)
        return np.asarray(self.cdfs[m](np.asarray(x, dtype=float)), dtype=float)

    def rect_many(self, corners: np.ndarray) -> np.ndarray:
        corners = np.atleast_2d(np.asarray(corners, dtype=float))
        if corners.shape[1] != self.dim:
            raise DimensionError(f"measure is {self.dim}-d, corners are {corners.shape[1]}-d")
        out = np.full(corners.shape[0], self.scale)
        for m in range(self.dim):
            out = out * self.axis(m, corners[:, m])
        return out

    def rect(self, r: Rect | Sequence[float]) -> float:
        corner = r.corner if isinstance(r, Rect) else tuple(r)
        return float(self.rect_many(np.array([corner]))[0])


LEBESGUE2 = Measure.lebesgue(2)


def _staircase_2d(corners: Sequence[Corner], sigma: Measure) -> float:
    # canonical 2-d antichain: x ascending forces y descending
    xs = sigma.axis(0, [c[0] for c in corners])
    ys = sigma.axis(1, [c[1] for c in corners])
    widths = np.diff(np.concatenate([[0.0], xs]))
    return float(sigma.scale * np.sum(widths * ys))


def _inclusion_exclusion(corners: Sequence[Corner], sigma: Measure) -> float:
    k = len(corners)
    if k > IE_CORNER_CAP:
        raise ValueError(f"{k} corners exceeds the inclusion-exclusion cap of {IE_CORNER_CAP}")
    arr = np.asarray(corners, dtype=float)
    total = 0.0
    for size in range(1, k + 1):
        sign = 1.0 if size % 2 else -1.0
        idx = np.array(list(itertools.combinations(range(k), size)))
        mins = arr[idx].min(axis=1)
        total += sign * float(np.sum(sigma.rect_many(mins)))
    return total


def union_measure(u: UnionSet, sigma: Measure) -> float:
    if u.is_empty:
        return 0.0
    if u.dim != sigma.dim:
        raise DimensionError(f"set is {u.dim}-d, measure is {sigma.dim}-d")
    if u.dim == 2:
        return _staircase_2d(u.corners, sigma)
    if u.dim == 1:
        return sigma.rect(u.corners[-1])
    return _inclusion_exclusion(u.corners, sigma)


def increment_measure(a: Rect, u: UnionSet, sigma: Measure) -> float:
    """Measure of a minus u, as sigma(a | u) - sigma(u)."""
    diff = union_measure(union_of(u, a), sigma) - union_measure(u, sigma)
    return max(diff, 0.0)


def union_with_rects_measure(base: UnionSet, corners: np.ndarray, sigma: Measure) -> np.ndarray:
    """sigma(base | [0, c]) for every row c of ``corners``, vectorized in 2-d."""
    corners = np.atleast_2d(np.asarray(corners, dtype=float))
    if base.is_empty:
        return sigma.rect_many(corners)
    if sigma.dim != 2:
        return np.array([union_measure(union_of(base, Rect(c)), sigma) for c in corners])
    bx = np.array([c[0] for c in base.corners])
    by = np.array([c[1] for c in base.corners])
    cx, cy = corners[:, 0:1], corners[:, 1:2]
    # measure of base & [0, c]: staircase columns clipped to the rectangle
    right = sigma.axis(0, np.minimum(bx[None, :], cx))
    left = sigma.axis(0, np.minimum(np.concatenate([[0.0], bx[:-1]])[None, :], cx))
    height = sigma.axis(1, np.minimum(by[None, :], cy))
    overlap = sigma.scale * np.sum((right - left) * height, axis=1)
    return union_measure(base, sigma) + sigma.rect_many(corners) - overlap


# --- scaling action -------------------------------------------------------


def _check_group_element(g: Sequence[float]) -> tuple[float, ...]:
    g = tuple(float(v) for v in g)
    if not g or any(not (v > 0) or not math.isfinite(v) for v in g):
        raise ValueError(f"scaling element must have strictly positive entries, got {g}")
    return g


def eta(g: Sequence[float]) -> float:
    """Measure multiplier of the scaling action under Lebesgue measure."""
    return math.prod(_check_group_element(g))


def scale_action(g: Sequence[float], u: UnionSet | Rect) -> UnionSet:
    g = _check_group_element(g)
    u = as_union(u)
    if u.corners:
        _check_dims(g, u.corners[0])
    return union_canonicalize(tuple(a * b for a, b in zip(c, g)) for c in u.corners)


def group_product(g: Sequence[float], h: Sequence[float]) -> tuple[float, ...]:
    g, h = _check_group_element(g), _check_group_element(h)
    _check_dims(g, h)
    return tuple(a * b for a, b in zip(g, h))


# --- JSON -----------------------------------------------------------------


def load_sets(source) -> tuple[int, list[Rect]]:
    """Read ``{"dim": d, "sets": [[...], ...]}`` from a path, file or dict."""
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    dim = int(doc["dim"])
    rects = [Rect(c) for c in doc["sets"]]
    for r in rects:
        if r.dim != dim:
            raise DimensionError(f"set {list(r.corner)} is not {dim}-d")
    return dim, rects


def dump_sets(rects: Sequence[Rect]) -> dict:
    dim = _check_dims(*(r.corner for r in rects))
    return {"dim": dim, "sets": [list(r.corner) for r in rects]}


def load_union(doc: dict) -> UnionSet:
    return union_canonicalize(doc["corners"])
