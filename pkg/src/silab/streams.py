"""Counter-based random streams.

Every draw is addressed by (seed, stream key, index): the key selects a
Philox4x64 key and the index is the position in that key's output. A value
therefore never depends on how many draws were made before it, on chunking,
or on which thread produced it.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_BLOCK = 4  # Philox4x64 emits four words per counter increment


def _key(seed: int, *labels: int) -> list[int]:
    h = np.random.SeedSequence([int(seed) & _MASK64, *(int(v) for v in labels)])
    return [int(w) for w in h.generate_state(2, dtype=np.uint64)]


def raw(seed: int, labels: tuple[int, ...], start: int, count: int) -> np.ndarray:
    """uint64 words [start, start + count) of the stream keyed by (seed, labels)."""
    if count <= 0:
        return np.empty(0, dtype=np.uint64)
    bitgen = np.random.Philox(key=_key(seed, *labels))
    skip, offset = divmod(int(start), _BLOCK)
    if skip:
        bitgen.advance(skip)
    return bitgen.random_raw(offset + count)[offset:]


def uniforms(seed: int, labels: tuple[int, ...], start: int, count: int) -> np.ndarray:
    """Open-interval uniforms (0, 1) built from the top 53 bits of each word."""
    words = raw(seed, labels, start, count)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(seed: int, labels: tuple[int, ...], start: int, count: int) -> np.ndarray:
    """Standard normals by inverse CDF."""
    return ndtri(uniforms(seed, labels, start, count))


def poisson_inverse(u: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Poisson(mean) quantiles of u by sequential CDF search."""
    u = np.asarray(u, dtype=float)
    mean = np.broadcast_to(np.asarray(mean, dtype=float), u.shape)
    k = np.zeros(u.shape, dtype=np.int64)
    pmf = np.exp(-mean)
    cdf = pmf.copy()
    todo = u > cdf
    step = 0
    while np.any(todo):
        step += 1
        idx = np.nonzero(todo)
        pmf[idx] = pmf[idx] * mean[idx] / step
        cdf[idx] = cdf[idx] + pmf[idx]
        k[idx] += 1
        # cdf stalls below u only through rounding in the far tail
        todo = (u > cdf) & (pmf > 0)
    return k


def fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy & ((1 << 63) - 1))
