"""Deterministic named RNG substreams.

All randomness in the package flows from a single integer seed. Independent
consumers (weight init, shuffling, dropout, synthetic data) each draw from a
named substream so that adding or removing one consumer never perturbs the
others. Streams are PCG64 generators keyed by ``SeedSequence(seed, spawn_key)``
where the spawn key is derived from the stream name parts via SHA-256, which
makes them reproducible across platforms and runs.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_part(part: object) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def substream(seed: int, *names: object) -> np.random.Generator:
    """Return the generator for the substream identified by ``names``."""
    key = tuple(_key_part(p) for p in names)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
