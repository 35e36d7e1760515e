"""LFSR-generated Toeplitz hashing and one-time-pad signing of digests.

Convention (shared by every party, so it is part of the wire format):

* The first Toeplitz column is ``init``.
* Column ``k + 1`` is column ``k`` shifted one place toward higher bit
  indices; the bit entering at index 0 is the parity of the taps selected by
  the polynomial, ``sum_i p_i * col_k[n - 1 - i]`` for
  ``p = x**n + sum_{i<n} p_i x**i``.  The bit leaving at index ``n - 1`` is
  discarded.

Equivalently, with ``s_t`` the LFSR output sequence whose first ``n`` terms
are ``init`` reversed, ``H[r][k] = s[k + n - 1 - r]``: constant along
diagonals, i.e. a genuine Toeplitz matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bitcore import BitString, Gf2Poly, _is_irreducible_int, poly_mod

__all__ = [
    "HashSpec",
    "Digest",
    "Signature",
    "HashOperator",
    "toeplitz_hash",
    "toeplitz_matrix",
    "make_digest",
    "split_digest",
    "encrypt_digest",
    "decrypt_signature",
    "collision_bound",
    "log2_collision_bound",
]


@lru_cache(maxsize=1 << 16)
def _checked_irreducible(coeffs: int) -> bool:
    return _is_irreducible_int(coeffs)


@dataclass(frozen=True)
class HashSpec:
    poly: Gf2Poly
    init: BitString

    def __post_init__(self):
        n = self.poly.degree
        if n < 1:
            raise ValueError("hash polynomial must have degree >= 1")
        if self.init.length != n:
            raise ValueError(f"init length {self.init.length} != polynomial degree {n}")
        if not _checked_irreducible(self.poly.coeffs):
            raise ValueError(f"polynomial {self.poly} is reducible")

    @property
    def n(self) -> int:
        return self.poly.degree


def _tap_mask(poly: Gf2Poly) -> int:
    n = poly.degree
    mask = 0
    for i in range(n):
        if (poly.coeffs >> i) & 1:
            mask |= 1 << (n - 1 - i)
    return mask


def toeplitz_hash(spec: HashSpec, message: BitString) -> BitString:
    """Hash ``message`` column by column without building the matrix."""
    if message.length < 1:
        raise ValueError("cannot hash an empty message")
    n = spec.n
    full = (1 << n) - 1
    taps = _tap_mask(spec.poly)
    state = spec.init.value
    m = message.value
    h = 0
    for _ in range(message.length):
        if m & 1:
            h ^= state
        m >>= 1
        fb = (state & taps).bit_count() & 1
        state = ((state << 1) & full) | fb
    return BitString(h, n)


def toeplitz_matrix(spec: HashSpec, m: int) -> list[list[int]]:
    """The explicit n x m matrix (rows of 0/1); for testing and small cases."""
    n = spec.n
    taps = _tap_mask(spec.poly)
    full = (1 << n) - 1
    cols = []
    state = spec.init.value
    for _ in range(m):
        cols.append(state)
        fb = (state & taps).bit_count() & 1
        state = ((state << 1) & full) | fb
    return [[(c >> r) & 1 for c in cols] for r in range(n)]


class HashOperator:
    """The hash of one message under one polynomial, as a linear map of the key.

    ``apply(init)`` equals ``toeplitz_hash(HashSpec(poly, init), message)`` but
    costs one XOR per set key bit after an O(m) setup, which is what makes
    scanning a Hamming ball of candidate keys affordable.
    """

    def __init__(self, poly: Gf2Poly, message: BitString):
        if message.length < 1:
            raise ValueError("cannot hash an empty message")
        n = poly.degree
        self.n = n
        p = poly.coeffs
        # g[r] = x**(n-1-r) * M(x) mod p; output bit r reads g[r] against the
        # reversed key, so the image of key bit j is bit (n-1-j) of each g[r]
        g = [0] * n
        cur = poly_mod(message.value, p)
        top = 1 << n
        for r in range(n - 1, -1, -1):
            g[r] = cur
            cur <<= 1
            if cur & top:
                cur ^= p
        if n < 64:
            G = np.array(g, dtype=np.uint64)
            sh = np.arange(n - 1, -1, -1, dtype=np.uint64)
            bits = (G[None, :] >> sh[:, None]) & np.uint64(1)
            self.images = [int(v) for v in (bits << np.arange(n, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)]
            return
        images = []
        for j in range(n):
            sh = n - 1 - j
            v = 0
            for r in range(n):
                v |= ((g[r] >> sh) & 1) << r
            images.append(v)
        self.images = images

    def apply_int(self, key: int) -> int:
        h = 0
        imgs = self.images
        while key:
            low = key & -key
            h ^= imgs[low.bit_length() - 1]
            key ^= low
        return h

    def apply(self, init: BitString) -> BitString:
        if init.length != self.n:
            raise ValueError(f"key length {init.length} != {self.n}")
        return BitString(self.apply_int(init.value), self.n)


@dataclass(frozen=True)
class Digest:
    hash: BitString
    seed: BitString

    def __post_init__(self):
        if self.hash.length != self.seed.length:
            raise ValueError("hash and seed lengths differ")

    @property
    def bits(self) -> BitString:
        return self.hash.concat(self.seed)

    def to_bytes(self) -> bytes:
        return self.bits.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Digest":
        return split_digest(BitString.from_bytes(data))


@dataclass(frozen=True)
class Signature:
    body: BitString

    def __post_init__(self):
        if self.body.length % 2:
            raise ValueError("signature length must be even")

    @property
    def n(self) -> int:
        return self.body.length // 2

    def to_bytes(self) -> bytes:
        return self.body.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Signature":
        return cls(BitString.from_bytes(data))


def make_digest(h: BitString, seed: BitString) -> Digest:
    if h.length != seed.length:
        raise ValueError(f"hash length {h.length} != seed length {seed.length}")
    return Digest(h, seed)


def split_digest(bits: BitString) -> Digest:
    if bits.length % 2:
        raise ValueError("digest length must be even")
    h, seed = bits.split(bits.length // 2)
    return Digest(h, seed)


def encrypt_digest(d: Digest, pad: BitString) -> Signature:
    body = d.bits
    if pad.length != body.length:
        raise ValueError(f"pad length {pad.length} != digest length {body.length}")
    return Signature(body ^ pad)


def decrypt_signature(s: Signature, pad: BitString) -> Digest:
    if pad.length != s.body.length:
        raise ValueError(f"pad length {pad.length} != signature length {s.body.length}")
    return split_digest(s.body ^ pad)


def collision_bound(m: int, n: int) -> float:
    """m / 2**(n-1), capped at 1."""
    if m < 1 or n < 2:
        raise ValueError("need m >= 1 and n >= 2")
    if m.bit_length() > n:
        return 1.0
    return min(1.0, math.ldexp(float(m), -(n - 1)))


def log2_collision_bound(m: int, n: int) -> float:
    return min(0.0, math.log2(m) - (n - 1))
