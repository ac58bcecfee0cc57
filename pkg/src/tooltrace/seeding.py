"""Deterministic seed derivation.

All randomness in the package flows from a single 64-bit root seed. Child
streams (per task, per instance, per worker) are derived by hashing the root
seed together with integer indices, so results are reproducible regardless of
sampling order or worker count.
"""

from __future__ import annotations

import hashlib
import random

MASK64 = (1 << 64) - 1


def split_seed(seed: int, *indices: int) -> int:
    """Derive a child seed from a root seed and a path of indices."""
    key = ("%d:" % (seed & MASK64) + ":".join(str(i) for i in indices)).encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(seed: int, *indices: int) -> random.Random:
    """Seeded stdlib RNG for the derived stream."""
    return random.Random(split_seed(seed, *indices))
