"""Seedable random streams built on numpy's PCG64.

Every consumer asks for a stream by name (plus optional integer keys), so
adding a new consumer never shifts the draws seen by existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, name, *keys)``."""
    spawn_key = (_name_key(name),) + tuple(int(k) for k in keys)
    seq = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(seq))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from ``rng`` for handing to a sub-component."""
    return int(rng.integers(0, 2**63 - 1))
