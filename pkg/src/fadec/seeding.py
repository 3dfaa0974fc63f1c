"""Deterministic, named random-number streams.

Every command derives all randomness from a single integer seed.  Modules
never share a generator: each consumer asks for a stream by name, so the
order in which components draw numbers cannot affect each other.
"""

from __future__ import annotations

import zlib

import numpy as np


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Return an independent generator for (seed, name).

    The same (seed, name) pair always yields the same stream, on any
    platform, regardless of what other streams were consumed before.
    """
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, tag]))
