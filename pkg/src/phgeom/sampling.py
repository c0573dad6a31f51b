"""Deterministic counter-based sampling.

The unit-cube coordinate ``j`` of sample ``i`` under seed ``s`` is

    key   = 4 * i + j                       (as an unsigned 64-bit integer)
    bits  = splitmix64(s XOR splitmix64(key))
    value = (bits >> 11) * 2**-53           (a double in [0, 1))

where splitmix64 is the standard finalizer

    x = x + 0x9E3779B97F4A7C15
    x = (x XOR (x >> 30)) * 0xBF58476D1CE4E5B9
    x = (x XOR (x >> 27)) * 0x94D049BB133111EB
    x = x XOR (x >> 31)

with all arithmetic modulo 2**64. Families map the unit cube to their own
sampling domain, so any port that reproduces these bits reproduces the points.
"""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1


def splitmix64(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def unit_samples(seed: int, start: int, count: int) -> np.ndarray:
    """Points of the unit cube [0, 1)^4 for indices start .. start+count-1."""
    seed = np.uint64(int(seed) & MASK)
    idx = np.arange(start, start + count, dtype=np.uint64)
    keys = idx[:, None] * np.uint64(4) + np.arange(4, dtype=np.uint64)[None, :]
    bits = splitmix64(seed ^ splitmix64(keys))
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
