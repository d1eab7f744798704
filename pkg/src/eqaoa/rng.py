"""Deterministic RNG substreams.

Every random draw in this package comes from a generator derived from
(base seed, integer path), so any piece of a run can be recomputed in
isolation and results never depend on scheduling or interruption.
"""
from __future__ import annotations

import numpy as np

# Purpose codes used as the first path component of a substream. Keeping
# them in one place guarantees no two subsystems share a stream.
INIT = 0
EVAL = 1
SELECT = 2
CROSSOVER = 3
MUTATE = 4
SAMPLE = 5
BASELINE_INIT = 6
BASELINE_EVAL = 7

# Phase tags for the two evaluation passes within one generation.
PARENT_PASS = 0
OFFSPRING_PASS = 1


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream identified by ``path`` under ``seed``.

    Paths are tuples of non-negative integers (purpose code, island id,
    generation, index, ...). Distinct paths give statistically independent
    streams; identical paths give identical streams.
    """
    if seed < 0:
        raise ValueError(f"base seed must be non-negative, got {seed}")
    if any(c < 0 for c in path):
        raise ValueError(f"substream path components must be non-negative: {path}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=path)))


def derive_seed(seed: int, *path: int) -> int:
    """Collapse (seed, path) to a single reproducible 32-bit seed."""
    if seed < 0:
        raise ValueError(f"base seed must be non-negative, got {seed}")
    return int(np.random.SeedSequence(seed, spawn_key=path).generate_state(1)[0])
