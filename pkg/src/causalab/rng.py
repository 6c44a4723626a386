"""Counter-based random streams.

Every random draw in the package is addressed by ``(seed, record, slot)``:
the record stream is ``derive(seed, record)`` and draw ``slot`` of that stream
is ``mix64(stream + (slot + 1) * GAMMA)``.  This is the SplitMix64 output
function applied to a SplittableRandom-style state, evaluated in closed form,
so a draw never depends on how many other draws were made before it.  Results
are therefore identical whatever way records are split across workers.
"""

from __future__ import annotations

import numpy as np
from scipy import special

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(z):
    """SplitMix64 finalizer on uint64 scalars or arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _u64(x) -> np.uint64:
    return np.uint64(int(x) & _MASK)


def derive(seed, index):
    """Seed of sub-stream ``index`` of ``seed``; ``index`` may be an array."""
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(_u64(seed) + (idx + np.uint64(1)) * GAMMA)


def bits(streams, slot: int):
    """Raw 64-bit draw number ``slot`` of each stream."""
    streams = np.asarray(streams, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(streams + _u64(slot + 1) * GAMMA)


def uniform(streams, slot: int) -> np.ndarray:
    """Uniform draws strictly inside (0, 1), 53 bits of resolution."""
    b = bits(streams, slot) >> np.uint64(11)
    return (b.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def normal(streams, slot: int) -> np.ndarray:
    return special.ndtri(uniform(streams, slot))


def exponential(streams, slot: int) -> np.ndarray:
    """Unit-rate exponential draws."""
    return -np.log(uniform(streams, slot))


def gamma_mean_one(streams, slot: int, var: float) -> np.ndarray:
    """Gamma draws with mean 1 and variance ``var`` (``var == 0`` gives ones)."""
    u = uniform(streams, slot)
    if var == 0:
        return np.ones_like(u)
    shape = 1.0 / var
    return special.gammaincinv(shape, u) * var


def record_streams(seed: int, start: int, stop: int) -> np.ndarray:
    """Streams of records ``start .. stop-1``."""
    return derive(seed, np.arange(start, stop, dtype=np.uint64))


def chunks(n: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous record ranges, one per worker."""
    workers = max(1, min(int(workers), n))
    edges = np.linspace(0, n, workers + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def map_chunks(fn, n: int, workers: int = 1) -> list:
    """Apply ``fn(start, stop)`` over record chunks, in order."""
    parts = chunks(n, workers)
    if len(parts) <= 1:
        return [fn(a, b) for a, b in parts]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        return list(pool.map(lambda ab: fn(*ab), parts))
