"""Counter-based random streams.

Every Monte Carlo batch draws from its own Philox stream keyed by
(seed, batch index), so results never depend on how batches are spread
over workers.
"""
from __future__ import annotations

import numpy as np


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for batch ``index`` of a run seeded by ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples via Box-Muller on the uniform stream."""
    u1 = rng.random(shape)
    u2 = rng.random(shape)
    radius = np.sqrt(-np.log1p(-u1))
    return radius * np.exp(2j * np.pi * u2)
