"""Deterministic seed derivation.

All randomness in an audit run flows from one top-level seed. Component
streams are derived from (seed, *path) where path elements are small ints
or strings; strings are hashed with BLAKE2 so the derivation does not
depend on Python's per-process hash randomization.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _as_entropy(item: int | str) -> int:
    if isinstance(item, int):
        if item < 0:
            raise ValueError("seed path ints must be non-negative")
        return item
    digest = hashlib.blake2s(item.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derive_seed(seed: int, *path: int | str) -> int:
    """Derive a child seed (uint64) from a root seed and a component path."""
    ss = np.random.SeedSequence([_as_entropy(seed), *(_as_entropy(p) for p in path)])
    return int(ss.generate_state(1, np.uint64)[0])


def generator(seed: int, *path: int | str) -> np.random.Generator:
    """PCG64 generator for the derived (seed, *path) stream."""
    ss = np.random.SeedSequence([_as_entropy(seed), *(_as_entropy(p) for p in path)])
    return np.random.Generator(np.random.PCG64(ss))


def philox_key(seed: int, *path: int | str) -> np.ndarray:
    """128-bit Philox key for counter-based per-index streams."""
    ss = np.random.SeedSequence([_as_entropy(seed), *(_as_entropy(p) for p in path)])
    return ss.generate_state(2, np.uint64)
