"""Deterministic RNG derivation for independent sampling streams.

Every stochastic component draws from a numpy Generator derived from a root
seed plus a string/int key path, so repeated runs (and parallel workers) get
bit-identical streams without sharing state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_hash(*parts: object) -> int:
    """Hash a key path to a 64-bit int, stable across processes and runs."""
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


def derive_rng(seed: int, *parts: object) -> np.random.Generator:
    """A numpy Generator for the stream identified by (seed, *parts)."""
    return np.random.default_rng(np.random.SeedSequence((seed, stable_hash(*parts))))
