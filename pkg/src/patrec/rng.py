"""Portable seeded random numbers.

Everything random in this toolkit is driven by ``Rng``, a counter-based
generator in the splitmix64 family: output ``i`` of the stream with seed
``s`` is ``mix64(s + (i+1)*GOLDEN)`` where ``mix64`` is the splitmix64
finalizer.  Only 64-bit integer arithmetic is involved, so the raw stream
is bit-identical on every platform and trivially vectorizable.  Platform
default generators are never used.

Uniform doubles are built from the top 53 bits of the raw stream (exact on
any IEEE-754 machine).  Gaussian variates use the Box-Muller transform;
their bit-exactness across *platforms* inherits the quality of libm's
``log``/``cos``/``sin``, which agree on all mainstream systems.  On a given
platform every draw is exactly reproducible.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on a uint64 array."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, index: int) -> int:
    """Deterministic child seed: element ``index`` of the stream ``seed``.

    This is the documented stream-splitting rule used for per-phantom and
    per-stage seeds: ``child = mix64(seed + (index+1)*GOLDEN)``.
    """
    s = np.uint64(seed & _MASK64)
    idx = np.asarray([index + 1], dtype=np.uint64)
    return int(_mix64(s + idx * GOLDEN)[0])


class Rng:
    """Counter-based random stream for one 64-bit seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._counter = 0

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw uint64 words of the stream."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _mix64(np.uint64(self.seed) + idx * GOLDEN)

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """``n`` doubles uniform in [low, high)."""
        u01 = (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u01

    def normal(self, n: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """``n`` Gaussian doubles via Box-Muller."""
        pairs = (n + 1) // 2
        # u1 in (0, 1] so that log(u1) is finite
        u1 = ((self.raw(pairs) >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0**-53
        u2 = (self.raw(pairs) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:n]
        return mean + std * z

    def integers(self, low: int, high: int, n: int = 1) -> np.ndarray:
        """``n`` integers uniform in [low, high).

        Computed as ``floor(u01 * span)``; the bias is below 2**-53 per draw
        for the small spans used here.
        """
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        u01 = (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + np.floor(u01 * (high - low)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n)
        if n < 2:
            return perm
        js = self.integers(0, 2**53, n - 1)  # one draw per swap, reduced below
        for i in range(n - 1, 0, -1):
            j = int(js[n - 1 - i] % (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
