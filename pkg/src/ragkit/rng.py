"""Deterministic randomness plumbing.

All stochastic code paths draw from numpy Generators backed by the
counter-based Philox bit generator, created from explicit integer seeds.
Child streams are derived with SeedSequence.spawn so that per-task seeds
are reproducible regardless of execution order.
"""

from __future__ import annotations

import numpy as np


def generator(seed) -> np.random.Generator:
    """Return a Philox-backed Generator; pass through existing Generators."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(int(seed)))


def spawn(seed, n: int) -> list[np.random.Generator]:
    """Derive n independent child generators from one master seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(n)]
