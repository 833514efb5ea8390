"""Seeded random streams.

Every stochastic component takes an explicit ``numpy.random.Generator``.
Substreams are keyed by integers (anchor index, trial index, ...) through
``SeedSequence.spawn_key`` so a given key always yields the same draws,
independently of how many other keys are in use.
"""

from __future__ import annotations

import numpy as np

RandomStream = np.random.Generator


def stream(seed: int, *keys: int) -> RandomStream:
    """Return the generator for ``seed`` at substream ``keys``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(seq))
