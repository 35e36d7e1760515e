"""Derivation of independent random streams from one 64-bit master seed.

Every consumer names itself with a label (and optionally integer indices such
as a trial number); the stream seed is BLAKE2b(master, label, indices)
truncated to 64 bits.  Results therefore do not depend on the order in which
trials are executed.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(master: int, label: str, *indices: int) -> int:
    h = hashlib.blake2b(digest_size=8, person=b"qds-forge-seed")
    h.update((master & MASK64).to_bytes(8, "little"))
    h.update(label.encode())
    for i in indices:
        h.update(b"/" + int(i).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def rng_for(master: int, label: str, *indices: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, label, *indices)))
