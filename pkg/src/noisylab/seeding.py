"""Seed handling shared by every randomized component.

All generators are numpy ``default_rng`` (PCG64). Seeds are passed around as
entropy tuples so that independent streams can be derived from one run seed
without overlap: ``rng_from(seed, tag)`` and ``rng_from(seed, tag, epoch)``
give unrelated, reproducible streams.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

# Stream tags used by the trainer to split a single run seed.
NOISE_STREAM = 101
INIT_STREAM = 202
SHUFFLE_STREAM = 303

SeedLike = int | Sequence[int]


def entropy(seed: SeedLike) -> tuple[int, ...]:
    """Normalize an int or a sequence of ints into an entropy tuple."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def rng_from(seed: SeedLike, *extra: int) -> np.random.Generator:
    """Deterministic PCG64 generator keyed by seed plus optional stream tags.

    numpy zero-pads entropy, so (s,) and (s, 0) collide. Callers that append
    a possibly-zero component (like an epoch) must put a nonzero tag before
    it, which is why the stream tags above start at 101.
    """
    return np.random.default_rng(entropy(seed) + tuple(int(e) for e in extra))
