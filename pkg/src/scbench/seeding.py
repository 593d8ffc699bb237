"""Deterministic RNG derivation.

Every stochastic step in the library draws from a generator keyed by a
global seed plus context fields (corruption name, severity, item index,
...), so results do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stable_hash64(text: str) -> int:
    """Map a string to a 64-bit integer, independent of PYTHONHASHSEED."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(seed: int, *fields: int | str) -> np.random.Generator:
    """Counter-style generator for (seed, *fields).

    Strings are hashed with :func:`stable_hash64`; integers enter the key
    directly (masked to 64 bits). The same key always yields the same
    stream, regardless of what was drawn elsewhere.
    """
    entropy = [int(seed) & _MASK64]
    for field in fields:
        if isinstance(field, str):
            entropy.append(stable_hash64(field))
        else:
            entropy.append(int(field) & _MASK64)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
