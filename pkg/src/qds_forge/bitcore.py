"""Bit strings, GF(2) polynomials, binary entropy and Hamming balls.

Bit strings are stored as a Python ``int`` plus an explicit length.  Bit ``i``
of the string is bit ``i`` of the integer, so the text form ``"1010"`` has
``bits[0] == 1``.  Polynomials over GF(2) use the same little-endian layout:
bit ``i`` is the coefficient of ``x**i``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations
from typing import Iterable, Iterator

import numpy as np

__all__ = [
    "BitString",
    "Gf2Poly",
    "LikelySetSpec",
    "xor",
    "hamming_distance",
    "binary_entropy",
    "inverse_binary_entropy",
    "hamming_ball_size",
    "log2_hamming_ball_size",
    "enumerate_ball",
    "enumerate_flip_sets",
    "clmul",
    "poly_mod",
    "poly_gcd",
    "gf2_mul_mod",
    "is_irreducible",
    "gen_irreducible",
]


@dataclass(frozen=True)
class BitString:
    """Immutable fixed-length bit string."""

    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if self.value < 0 or self.value.bit_length() > self.length:
            raise ValueError(f"value does not fit in {self.length} bits")

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        text = text.strip()
        if any(c not in "01" for c in text):
            raise ValueError(f"not a bit string: {text!r}")
        value = 0
        for i, c in enumerate(text):
            if c == "1":
                value |= 1 << i
        return cls(value, len(text))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitString":
        value = 0
        length = 0
        for i, b in enumerate(bits):
            if b not in (0, 1, True, False):
                raise ValueError(f"bit {i} is {b!r}")
            if b:
                value |= 1 << i
            length = i + 1
        return cls(value, length)

    @classmethod
    def zeros(cls, length: int) -> "BitString":
        return cls(0, length)

    @classmethod
    def ones(cls, length: int) -> "BitString":
        return cls((1 << length) - 1, length)

    @classmethod
    def random(cls, rng, length: int) -> "BitString":
        """Uniform random string drawn from a ``numpy.random.Generator``."""
        if length == 0:
            return cls(0, 0)
        nbytes = (length + 7) // 8
        raw = int.from_bytes(rng.bytes(nbytes), "little")
        return cls(raw & ((1 << length) - 1), length)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if i < 0:
            i += self.length
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.value >> i) & 1

    def __iter__(self) -> Iterator[int]:
        v = self.value
        for _ in range(self.length):
            yield v & 1
            v >>= 1

    def __xor__(self, other: "BitString") -> "BitString":
        return xor(self, other)

    def __str__(self) -> str:
        return "".join(str(b) for b in self)

    def weight(self) -> int:
        return self.value.bit_count()

    def concat(self, other: "BitString") -> "BitString":
        """``self`` followed by ``other``."""
        return BitString(self.value | (other.value << self.length), self.length + other.length)

    def split(self, at: int) -> tuple["BitString", "BitString"]:
        if not 0 <= at <= self.length:
            raise ValueError(f"split point {at} outside 0..{self.length}")
        low = self.value & ((1 << at) - 1)
        return BitString(low, at), BitString(self.value >> at, self.length - at)

    def flip(self, positions: Iterable[int]) -> "BitString":
        v = self.value
        for p in positions:
            if not 0 <= p < self.length:
                raise IndexError(p)
            v ^= 1 << p
        return BitString(v, self.length)

    def to_bytes(self) -> bytes:
        """Wire form: 8-byte little-endian bit count, then bits packed MSB-first."""
        nbytes = (self.length + 7) // 8
        out = bytearray(nbytes)
        v = self.value
        for i in range(self.length):
            if (v >> i) & 1:
                out[i >> 3] |= 0x80 >> (i & 7)
        return self.length.to_bytes(8, "little") + bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "BitString":
        if len(data) < 8:
            raise ValueError("missing length prefix")
        length = int.from_bytes(data[:8], "little")
        body = data[8:]
        if len(body) != (length + 7) // 8:
            raise ValueError(f"expected {(length + 7) // 8} payload bytes, got {len(body)}")
        value = 0
        for i in range(length):
            if body[i >> 3] & (0x80 >> (i & 7)):
                value |= 1 << i
        # padding bits must be zero so the encoding is canonical
        if length % 8 and body[-1] & (0xFF >> (length % 8)):
            raise ValueError("non-zero padding bits")
        return cls(value, length)

    def to_hex(self) -> str:
        return self.to_bytes()[8:].hex()


def xor(a: BitString, b: BitString) -> BitString:
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} vs {b.length}")
    return BitString(a.value ^ b.value, a.length)


def hamming_distance(a: BitString, b: BitString) -> int:
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} vs {b.length}")
    return (a.value ^ b.value).bit_count()


def binary_entropy(x: float) -> float:
    """H2(x) in bits; H2(0) = H2(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log1p(-x) / math.log(2.0)


def inverse_binary_entropy(y: float) -> float:
    """Return x in [0, 1/2] with H2(x) = y, by bisection on the increasing branch."""
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"inverse_binary_entropy argument {y} outside [0, 1]")
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if binary_entropy(mid) < y:
            lo = mid
        else:
            hi = mid
    return lo if abs(binary_entropy(lo) - y) <= abs(binary_entropy(hi) - y) else hi


def hamming_ball_size(n: int, r: int) -> int:
    """Number of n-bit strings within Hamming distance r of a fixed string."""
    if n < 0 or r < 0:
        raise ValueError("n and r must be non-negative")
    if r > n:
        raise ValueError(f"radius {r} exceeds length {n}")
    total = 0
    term = 1
    for k in range(r + 1):
        total += term
        term = term * (n - k) // (k + 1)
    return total


# exact big-integer evaluation up to this length, log-space above it
_EXACT_BALL_LIMIT = 4096


def log2_hamming_ball_size(n: int, r: int) -> float:
    """log2 of ``hamming_ball_size(n, r)``, usable for astronomically large n."""
    if r > n or r < 0:
        raise ValueError(f"radius {r} outside 0..{n}")
    if n <= _EXACT_BALL_LIMIT:
        return math.log2(hamming_ball_size(n, r))
    if 2 * r >= n:
        # complement: ball(n, r) = 2**n - ball(n, n - r - 1)
        if r == n:
            return float(n)
        rest = log2_hamming_ball_size(n, n - r - 1)
        return n + math.log1p(-(2.0 ** (rest - n))) / math.log(2)
    # terms C(n, k) increase with k below n/2: sum downward from the top term
    log_top = math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)
    acc = 1.0
    log_ratio = 0.0
    k = r
    while k > 0:
        log_ratio += math.log(k) - math.log(n - k + 1)
        term = math.exp(log_ratio)
        acc += term
        if term < 1e-18 * acc:
            break
        k -= 1
    return (log_top + math.log(acc)) / math.log(2)


@dataclass(frozen=True)
class LikelySetSpec:
    """Hamming ball standing in for a family of likely bit strings."""

    center: BitString
    radius: int

    def __post_init__(self):
        if not 0 <= self.radius <= self.center.length:
            raise ValueError(f"radius {self.radius} outside 0..{self.center.length}")

    @cached_property
    def cardinality(self) -> int:
        return hamming_ball_size(self.center.length, self.radius)

    def __contains__(self, item: BitString) -> bool:
        return hamming_distance(self.center, item) <= self.radius

    def __iter__(self) -> Iterator[BitString]:
        return enumerate_ball(self)


def enumerate_flip_sets(n: int, radius: int) -> Iterator[tuple[int, ...]]:
    """Index sets of size 0..radius over range(n), by size then lexicographically."""
    for d in range(radius + 1):
        yield from combinations(range(n), d)


def enumerate_ball(spec: LikelySetSpec) -> Iterator[BitString]:
    """Yield every string of the ball, nearest first."""
    c = spec.center
    for flips in enumerate_flip_sets(c.length, spec.radius):
        v = c.value
        for p in flips:
            v ^= 1 << p
        yield BitString(v, c.length)


# -- GF(2)[x] ------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Gf2Poly:
    """Polynomial over GF(2); bit i of ``coeffs`` is the coefficient of x**i."""

    coeffs: int

    def __post_init__(self):
        if self.coeffs < 0:
            raise ValueError("coefficients must be a non-negative int")

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return self.coeffs.bit_length() - 1

    @classmethod
    def from_exponents(cls, *exps: int) -> "Gf2Poly":
        v = 0
        for e in exps:
            v ^= 1 << e
        return cls(v)

    @classmethod
    def from_bitstring(cls, bits: BitString) -> "Gf2Poly":
        return cls(bits.value)

    def to_bitstring(self, length: int | None = None) -> BitString:
        return BitString(self.coeffs, self.degree + 1 if length is None else length)

    def exponents(self) -> list[int]:
        return [i for i in range(self.degree, -1, -1) if (self.coeffs >> i) & 1]

    def __str__(self) -> str:
        if self.coeffs == 0:
            return "0"
        parts = []
        for e in self.exponents():
            parts.append("1" if e == 0 else "x" if e == 1 else f"x^{e}")
        return " + ".join(parts)

    def __mul__(self, other: "Gf2Poly") -> "Gf2Poly":
        return Gf2Poly(clmul(self.coeffs, other.coeffs))

    def __add__(self, other: "Gf2Poly") -> "Gf2Poly":
        return Gf2Poly(self.coeffs ^ other.coeffs)

    __xor__ = __add__

    def __mod__(self, other: "Gf2Poly") -> "Gf2Poly":
        return Gf2Poly(poly_mod(self.coeffs, other.coeffs))


def clmul(a: int, b: int) -> int:
    """Carry-less product of two GF(2) polynomials packed in ints."""
    if a.bit_count() > b.bit_count():
        a, b = b, a
    out = 0
    while a:
        low = a & -a
        out ^= b << (low.bit_length() - 1)
        a ^= low
    return out


def poly_mod(a: int, m: int) -> int:
    if m == 0:
        raise ZeroDivisionError("polynomial modulus is zero")
    dm = m.bit_length()
    while True:
        da = a.bit_length()
        if da < dm:
            return a
        a ^= m << (da - dm)


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def gf2_mul_mod(a: Gf2Poly, b: Gf2Poly, modulus: Gf2Poly) -> Gf2Poly:
    if modulus.degree < 1:
        raise ValueError("modulus must have degree >= 1")
    return Gf2Poly(poly_mod(clmul(a.coeffs, b.coeffs), modulus.coeffs))


def _square_mod(a: int, m: int) -> int:
    # squaring over GF(2) interleaves zeros between the coefficient bits
    sq = int("0".join(bin(a)[2:]), 2) if a else 0
    return poly_mod(sq, m)


def _prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


_SIEVE_MAX_DEGREE = 24


@lru_cache(maxsize=None)
def _irreducible_table(degree: int) -> np.ndarray:
    """Boolean table over monic degree-``degree`` polynomials (index = low bits).

    Built by sieving out every product of a lower-degree irreducible with a
    monic cofactor, so lookups replace Rabin tests for small degrees.
    """
    size = 1 << degree
    reducible = np.zeros(size, dtype=bool)
    for k in range(1, degree // 2 + 1):
        if k == 1:
            factors = [0b10, 0b11]
        else:
            tab = _irreducible_table(k)
            factors = [(1 << k) | int(i) for i in np.flatnonzero(tab)]
        cof = np.arange(1 << (degree - k), 2 << (degree - k), dtype=np.uint64)
        for f in factors:
            prod = np.zeros_like(cof)
            bit = 0
            while f >> bit:
                if (f >> bit) & 1:
                    prod ^= cof << np.uint64(bit)
                bit += 1
            reducible[(prod ^ np.uint64(size)).astype(np.int64)] = True
    return ~reducible


def _is_irreducible_int(p: int) -> bool:
    n = p.bit_length() - 1
    if n == 1:
        return True
    if n <= _SIEVE_MAX_DEGREE:
        return bool(_irreducible_table(n)[p ^ (1 << n)])
    return _rabin(p, n)


def _rabin(p: int, n: int) -> bool:
    if not p & 1:
        return False
    # odd number of terms is necessary: otherwise x + 1 divides p
    if not p.bit_count() & 1:
        return False
    x = 0b10
    # powers[k] = x**(2**k) mod p
    powers = [x]
    t = x
    for _ in range(n):
        t = _square_mod(t, p)
        powers.append(t)
    if powers[n] != x:
        return False
    for q in _prime_factors(n):
        if poly_gcd(p, powers[n // q] ^ x) != 1:
            return False
    return True


def is_irreducible(p: Gf2Poly) -> bool:
    """Rabin's irreducibility test over GF(2)."""
    if p.degree < 1:
        raise ValueError("irreducibility is only defined for degree >= 1")
    return _is_irreducible_int(p.coeffs)


def _candidate_stream(seed: BitString, degree: int) -> Iterator[int]:
    """Counter-mode BLAKE2b expansion of the seed into monic candidates."""
    key = seed.to_bytes()
    middle_bits = degree - 1
    nbytes = (middle_bits + 7) // 8
    counter = 0
    while True:
        buf = b""
        block = 0
        while len(buf) < nbytes:
            h = hashlib.blake2b(
                key + counter.to_bytes(8, "little") + block.to_bytes(4, "little"),
                digest_size=64,
                person=b"qds-irreducible",
            )
            buf += h.digest()
            block += 1
        mid = int.from_bytes(buf[:nbytes], "little") & ((1 << middle_bits) - 1)
        yield (1 << degree) | (mid << 1) | 1
        counter += 1


@lru_cache(maxsize=1 << 16)
def _gen_irreducible_cached(seed: BitString, degree: int) -> int:
    for cand in _candidate_stream(seed, degree):
        if _is_irreducible_int(cand):
            return cand
    raise AssertionError("unreachable")


def gen_irreducible(seed: BitString, degree: int) -> Gf2Poly:
    """Deterministically derive an irreducible polynomial of the given degree.

    Candidates are monic with constant term 1; the middle coefficients come
    from BLAKE2b in counter mode keyed by the seed.  The first irreducible
    candidate is returned.
    """
    if degree < 2:
        raise ValueError("degree must be >= 2")
    if seed.length != degree:
        raise ValueError(f"seed length {seed.length} != degree {degree}")
    return Gf2Poly(_gen_irreducible_cached(seed, degree))
