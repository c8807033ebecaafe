"""SplitMix64 streams and seed derivation.

Every random draw in the package comes from a SplitMix64 stream so that the
same seed gives the same symbols on every platform, in Python and in the
compiled kernels alike.  Trial ``k`` of a run seeded with ``master`` uses the
``k``-th output of ``SplitMix64(master)`` as its own seed, which makes results
independent of how trials are scheduled across threads.
"""

from __future__ import annotations

import bisect

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_TO_UNIT = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 finalizer (a bijection on 64-bit integers)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Minimal SplitMix64 generator.

    >>> SplitMix64(1234567).next_u64()
    6457827717110365317
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * _TO_UNIT


def trial_seed(master: int, index: int) -> int:
    """Seed of trial ``index`` (0-based): output ``index + 1`` of SplitMix64(master)."""
    return mix64((master + (index + 1) * GOLDEN) & MASK64)


def trial_seeds(master: int, count: int, offset: int = 0) -> np.ndarray:
    return np.array([trial_seed(master, offset + k) for k in range(count)], dtype=np.uint64)


def cumulative(probs) -> np.ndarray:
    """Cumulative distribution used for inverse-CDF sampling; last entry pinned to 1."""
    cum = np.cumsum(np.asarray(probs, dtype=np.float64))
    cum[-1] = 1.0
    return cum


def draw_symbol(u: float, cum) -> int:
    """0-based index ``i`` with ``cum[i-1] <= u < cum[i]``."""
    return min(bisect.bisect_right(cum, u), len(cum) - 1)
