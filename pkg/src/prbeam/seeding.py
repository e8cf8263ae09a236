"""Deterministic child-stream derivation from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child_seed(seed, *key: int) -> np.random.SeedSequence:
    """Child stream addressed by ``key``; independent of how many siblings exist."""
    seed = as_seed_sequence(seed)
    return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(int(k) for k in key))


def name_key(name: str) -> int:
    """Stable integer key for a label, so adding a policy never shifts another's stream."""
    return zlib.crc32(name.encode("utf-8"))


def rng_for(seed, *key: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, *key) if key else as_seed_sequence(seed))
