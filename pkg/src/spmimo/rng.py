"""Reproducible random substreams.

Every random quantity is drawn from a Philox generator keyed by the base seed
and a tuple ``(purpose, index, ...)``. Streams with different keys are
statistically independent, and a stream depends only on its key, so results
do not depend on scheduling or worker count.
"""
from __future__ import annotations

import numpy as np

GEOMETRY = 1
FADING = 2
PILOTS = 3
MOMENTS = 4
CROSS = 5
RESAMPLE = 6


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for ``(seed, key)``; ``seed`` is any nonnegative integer."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
