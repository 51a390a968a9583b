"""Deterministic child-seed derivation.

Every stochastic stage draws its own seed from the run's master seed and a
stage name, so reruns reproduce bit-identically and stages stay independent
of each other's consumption of random numbers.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *parts: int | str) -> int:
    """Derive a 64-bit child seed from a master seed and labelling parts.

    Stable across processes and platforms (pure SHA-256, no Python hash
    randomization).
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big")


def rng_for(master: int, *parts: int | str) -> np.random.Generator:
    """Generator seeded with ``derive_seed(master, *parts)``."""
    return np.random.default_rng(derive_seed(master, *parts))
