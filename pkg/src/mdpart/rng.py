"""Reproducible random streams.

Every stream is a Philox (counter-based) generator keyed by a master seed and a
tuple of integers, so worker ``w`` of a run with seed ``s`` always sees the same
numbers no matter how many workers there are or in which order they start.
"""

from __future__ import annotations

import numpy as np

# spawn-key tags keep the independent uses of one master seed apart
TAG_SAMPLE = 0
TAG_IID_GAPS = 1
TAG_ENV = 2
TAG_WALK = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def randbelow(rng: np.random.Generator, bound: int) -> int:
    """Exact uniform integer in ``[0, bound)`` for an arbitrary-size ``bound``."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    if bound <= 2**62:
        return int(rng.integers(0, bound))
    nbits = bound.bit_length()
    nwords = (nbits + 31) // 32
    excess = nwords * 32 - nbits
    while True:
        words = rng.integers(0, 2**32, size=nwords, dtype=np.uint64)
        value = 0
        for w in words:
            value = (value << 32) | int(w)
        value >>= excess
        if value < bound:
            return value
