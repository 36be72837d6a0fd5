"""Deterministic random streams.

Every stochastic routine in the package draws from a ``numpy.random.Generator``
backed by Philox4x64-10, a counter-based generator (Salmon et al., Random123).
A stream is addressed by a 64-bit seed plus a tuple of non-negative integer
ids, for example ``(seed, tree_index)`` or ``(seed, experiment, grid, rep)``.

Key derivation::

    h = 0
    for id in ids:
        h = splitmix64(h ^ id)
    key = seed + (h << 64)          # 128-bit Philox key
    counter = 0

Distinct id tuples give distinct keys, so streams never overlap and results do
not depend on the order in which replicates are scheduled.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# Named stream families; used as the first id so that unrelated consumers of
# the same seed never share a stream.
TREE = 1
DATA = 2
TEST = 3
RISK = 4
GEOMETRY = 5
EQUIVALENCE = 6
SUBOPT = 7
BIAS = 8
RATES = 9
SAMPLE = 10


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, *ids: int) -> int:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    h = 0
    for i in ids:
        if i < 0:
            raise ValueError("stream ids must be non-negative")
        h = splitmix64(h ^ (int(i) & MASK64))
    return (int(seed) & MASK64) | (h << 64)


def stream(seed: int, *ids: int) -> np.random.Generator:
    """Return the generator for stream ``(seed, *ids)``."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *ids)))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an int seed, or None (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return stream(0)
    return stream(int(rng))
