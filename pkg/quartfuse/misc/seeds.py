"""Labelled seed derivation: every random draw in quartfuse comes from derive_seed."""
import hashlib

import numpy as np

def derive_seed(seed: int, *labels) -> int:
    """Hash a master seed and a sequence of labels into an independent u64 seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=False))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf8"))
    return int.from_bytes(h.digest(), "little")

def rng_for(seed: int, *labels) -> np.random.Generator:
    """A PCG64 generator seeded by derive_seed(seed, *labels)."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *labels)))
