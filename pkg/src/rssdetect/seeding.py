"""Deterministic seed derivation.

Every randomized operation takes a seed and builds its own PCG64
generator, so runs are reproducible and safely parallelizable.  Nested
streams are derived with ``numpy.random.SeedSequence`` spawn keys: the
mixing function H(master, *path) is SeedSequence(master, spawn_key=path),
whose output streams are independent and collision-free for distinct
paths.
"""

from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.SeedSequence"


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Wrap an int seed; pass SeedSequence instances through unchanged."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def derive_seed(master_seed: int, *path: int) -> int:
    """Mix a master seed with an integer path into a 128-bit child seed.

    Distinct paths give independent streams; the same (master, path)
    always gives the same child.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(p) for p in path))
    return int.from_bytes(ss.generate_state(4, np.uint32).tobytes(), "little")
