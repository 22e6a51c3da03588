"""
Seed plumbing. All randomness flows from one master seed.

Rule: child seed for path (i, j, ...) is the first 64-bit word generated by
``SeedSequence(entropy=master, spawn_key=(i, j, ...))``.
"""
from typing import Optional

import numpy as np

from src.utils.errors import ConfigError

_MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= _MAX_SEED:
        raise ConfigError(f"Seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def derive_seed(master: int, *path: int) -> int:
    """Deterministic child seed for a replicate index path."""
    seq = np.random.SeedSequence(entropy=check_seed(master), spawn_key=tuple(int(p) for p in path))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """PCG64 generator for a seed; identical seeds give identical streams on every platform."""
    if seed is None:
        raise ConfigError("A seed is required; ambient entropy is never used")
    return np.random.Generator(np.random.PCG64(check_seed(seed)))
