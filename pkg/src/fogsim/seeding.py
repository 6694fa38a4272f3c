"""Deterministic seed derivation for independent random streams.

Every random stream in a run (per-device arrivals, trigger draws, policy
randomness, topology generation) is seeded from a master seed plus a label
path, so adding streams never perturbs existing ones and runs reproduce
bit-identically across processes.
"""
from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: object) -> int:
    """Hash a label path into a 64-bit seed (stable across processes)."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(*parts: object) -> random.Random:
    return random.Random(derive_seed(*parts))
