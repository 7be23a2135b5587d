"""Seeded synthetic point clouds.

Uses splitmix64, a tiny language-neutral 64-bit generator, so identical
seeds give bit-identical clouds regardless of platform or numpy version.
The algorithm identifier is recorded alongside any synthetic output.
"""

from __future__ import annotations

import numpy as np

PRNG_ID = "splitmix64"

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(seed: int, count: int) -> list[int]:
    """First ``count`` outputs of splitmix64 for ``seed``."""
    x = seed & _MASK
    out = []
    for _ in range(count):
        x = (x + _GAMMA) & _MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out


def unit_uniform(seed: int, count: int) -> np.ndarray:
    """``count`` doubles uniform in [0, 1): top 53 bits of each output."""
    raw = splitmix64(seed, count)
    return np.array([(v >> 11) * 2.0**-53 for v in raw], dtype=np.float64)


def synthetic_cloud(count: int, seed: int) -> np.ndarray:
    """Uniform points in the unit cube, shape (count, 3)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return unit_uniform(seed, 3 * count).reshape(count, 3)
