"""Signing, the two verification procedures and full three-party sessions.

Original variant: each receiver scans the Hamming balls of likely X and Y
strings and accepts if any candidate pair reproduces the expected hash.
Improved variant: Alice publishes (X^A, Y^A) once both receivers confirm
receipt, and verification is a single recomputation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Optional

import numpy as np

from .bitcore import BitString, LikelySetSpec, enumerate_flip_sets, gen_irreducible
from .channel_sim import AdversaryKind, AdversaryModel, KgpOutput
from .lfsr_hash import (
    HashOperator,
    HashSpec,
    Signature,
    decrypt_signature,
    encrypt_digest,
    make_digest,
    toeplitz_hash,
)
from .seeding import rng_for

__all__ = [
    "AliceState",
    "ReceiverState",
    "VerifyOutcome",
    "TranscriptEvent",
    "Transcript",
    "Variant",
    "SessionResult",
    "sign",
    "build_likely_set",
    "likely_radius",
    "verify_likely",
    "verify_improved",
    "run_session",
]


@dataclass(frozen=True)
class AliceState:
    X_A: BitString
    Y_A: BitString
    p_seed: BitString

    def __post_init__(self):
        n = self.X_A.length
        if self.Y_A.length != 2 * n or self.p_seed.length != n:
            raise ValueError(
                f"malformed signer state: |X|={n}, |Y|={self.Y_A.length}, |p|={self.p_seed.length}"
            )

    @property
    def n(self) -> int:
        return self.X_A.length


@dataclass(frozen=True)
class ReceiverState:
    X_local: BitString
    Y_local: BitString
    X_peer: Optional[BitString] = None
    Y_peer: Optional[BitString] = None
    # (e1, e2, e3, e4): Bob-X, Bob-Y, Charlie-X, Charlie-Y
    error_rates: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for e in self.error_rates:
            if not 0.0 <= e < 0.5:
                raise ValueError(f"error rate {e} outside [0, 0.5)")

    @property
    def E_x(self) -> float:
        return self.error_rates[0] + self.error_rates[2]

    @property
    def E_y(self) -> float:
        return self.error_rates[1] + self.error_rates[3]

    @classmethod
    def for_bob(cls, keys: KgpOutput) -> "ReceiverState":
        return cls(keys.bob_X, keys.bob_Y, keys.charlie_X, keys.charlie_Y, keys.rates)

    @classmethod
    def for_charlie(cls, keys: KgpOutput) -> "ReceiverState":
        return cls(keys.charlie_X, keys.charlie_Y, keys.bob_X, keys.bob_Y, keys.rates)


@dataclass(frozen=True)
class VerifyOutcome:
    accepted: bool
    comparisons_made: int
    matched_pair: Optional[tuple[int, int]] = None
    aborted: bool = False


@dataclass(frozen=True)
class TranscriptEvent:
    sender: str
    receiver: str
    tag: str
    length: int


@dataclass
class Transcript:
    events: list[TranscriptEvent] = field(default_factory=list)

    def add(self, sender: str, receiver: str, tag: str, length: int) -> int:
        self.events.append(TranscriptEvent(sender, receiver, tag, length))
        return len(self.events) - 1

    def index(self, sender: str, receiver: str, tag: str) -> int:
        for i, e in enumerate(self.events):
            if (e.sender, e.receiver, e.tag) == (sender, receiver, tag):
                return i
        raise LookupError(f"no event {sender}->{receiver} {tag}")

    def to_text(self) -> str:
        return "".join(
            f"{i} {e.sender} {e.receiver} {e.tag} {e.length}\n" for i, e in enumerate(self.events)
        )

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        t = cls()
        for i, line in enumerate(text.splitlines()):
            step, sender, receiver, tag, length = line.split()
            if int(step) != i:
                raise ValueError(f"out-of-order step {step} at line {i}")
            t.add(sender, receiver, tag, int(length))
        return t


def _hash_spec(seed: BitString, key: BitString) -> HashSpec:
    return HashSpec(gen_irreducible(seed, seed.length), key)


def sign(alice: AliceState, message: BitString) -> tuple[Signature, TranscriptEvent]:
    if message.length < 1:
        raise ValueError("cannot sign an empty message")
    h = toeplitz_hash(_hash_spec(alice.p_seed, alice.X_A), message)
    sig = encrypt_digest(make_digest(h, alice.p_seed), alice.Y_A)
    return sig, TranscriptEvent("alice", "bob", "message_signature", message.length + sig.body.length)


def likely_radius(length: int, e_a: float, e_b: float) -> int:
    e = e_a + e_b
    if not 0.0 <= e < 0.5:
        raise ValueError(f"combined error rate {e} outside [0, 0.5)")
    # the tiny slack keeps float noise such as 20 * 0.1 = 2.0000000000000004 from adding a bit
    return min(length, math.ceil(length * e - 1e-9))


def build_likely_set(local: BitString, peer: BitString, e_a: float, e_b: float) -> LikelySetSpec:
    """Ball centred on local XOR peer with radius ceil(L * (e_a + e_b))."""
    return LikelySetSpec(local ^ peer, likely_radius(local.length, e_a, e_b))


@lru_cache(maxsize=64)
def _flip_table(n: int, radius: int) -> list[np.ndarray]:
    return [
        np.array(list(combinations(range(n), d)), dtype=np.intp).reshape(math.comb(n, d), d)
        for d in range(radius + 1)
    ]


def _ball_syndromes(images: list[int], n: int, radius: int) -> np.ndarray:
    """XOR of the key-bit images over every flip set of the ball, in ball order."""
    img = np.array(images, dtype=np.uint64)
    parts = []
    for d, table in enumerate(_flip_table(n, radius)):
        if d == 0:
            parts.append(np.zeros(1, dtype=np.uint64))
        else:
            parts.append(np.bitwise_xor.reduce(img[table], axis=1))
    return np.concatenate(parts)


def verify_likely(
    message: BitString,
    signature: Signature,
    receiver: ReceiverState,
    radii: Optional[tuple[int, int]] = None,
) -> VerifyOutcome:
    """Scan likely (X, Y) candidates, nearest first, stopping at the first match.

    ``radii`` overrides the rate-derived (X, Y) radii.
    """
    if receiver.X_peer is None or receiver.Y_peer is None:
        raise ValueError("receiver has not completed the string exchange")
    n = receiver.X_local.length
    if signature.body.length != 2 * n:
        raise ValueError(f"signature length {signature.body.length} != 2n = {2 * n}")
    e1, e2, e3, e4 = receiver.error_rates
    xset = build_likely_set(receiver.X_local, receiver.X_peer, e1, e3)
    yset = build_likely_set(receiver.Y_local, receiver.Y_peer, e2, e4)
    if radii is not None:
        xset = LikelySetSpec(xset.center, radii[0])
        yset = LikelySetSpec(yset.center, radii[1])
    nx = xset.cardinality
    xc = xset.center.value
    vectorized = n <= 64 and nx > 8
    x_flips = None if vectorized else list(enumerate_flip_sets(n, xset.radius))

    operators: dict[int, HashOperator] = {}
    syndromes: dict[int, np.ndarray] = {}
    comparisons = 0
    for j, yflips in enumerate(enumerate_flip_sets(2 * n, yset.radius)):
        k_j = yset.center.flip(yflips)
        expected = decrypt_signature(signature, k_j)
        poly = gen_irreducible(expected.seed, n)
        op = operators.get(poly.coeffs)
        if op is None:
            op = operators[poly.coeffs] = HashOperator(poly, message)
        # H(K_i) = H(center) ^ XOR of flipped-bit images, so compare syndromes
        target = expected.hash.value ^ op.apply_int(xc)
        if vectorized:
            syn = syndromes.get(poly.coeffs)
            if syn is None:
                syn = syndromes[poly.coeffs] = _ball_syndromes(op.images, n, xset.radius)
            hits = np.flatnonzero(syn == np.uint64(target))
            if hits.size:
                i = int(hits[0])
                return VerifyOutcome(True, comparisons + i + 1, (i, j))
            comparisons += nx
        else:
            imgs = op.images
            for i, xflips in enumerate(x_flips):
                acc = 0
                for b in xflips:
                    acc ^= imgs[b]
                comparisons += 1
                if acc == target:
                    return VerifyOutcome(True, comparisons, (i, j))
    return VerifyOutcome(False, comparisons)


def verify_improved(
    message: BitString, signature: Signature, published_X: BitString, published_Y: BitString
) -> bool:
    n = published_X.length
    if published_Y.length != 2 * n or signature.body.length != 2 * n:
        raise ValueError("published strings and signature have inconsistent lengths")
    expected = decrypt_signature(signature, published_Y)
    return toeplitz_hash(_hash_spec(expected.seed, published_X), message) == expected.hash


class Variant(str, enum.Enum):
    ORIGINAL = "original"
    IMPROVED = "improved"


@dataclass
class SessionResult:
    bob: VerifyOutcome
    charlie: VerifyOutcome
    transcript: Transcript
    signature: Signature
    forwarded: tuple[BitString, Signature]

    @property
    def aborted(self) -> bool:
        return self.bob.aborted or self.charlie.aborted


def _forge(adv: AdversaryModel, keys: KgpOutput, message: BitString, sig: Signature):
    rng = rng_for(adv.seed, f"adversary-{adv.kind.value}")
    m2 = message
    while m2 == message:
        m2 = BitString.random(rng, message.length)
    if adv.kind is AdversaryKind.TAMPER_MESSAGE:
        return m2, sig
    if adv.kind is AdversaryKind.FORGE_PAIR:
        body = sig.body
        while body == sig.body:
            body = BitString.random(rng, sig.body.length)
        return m2, Signature(body)
    # guess Charlie's strings bitwise, then sign M' with the implied centres
    def guess(s: BitString) -> BitString:
        return s.flip(int(i) for i in np.flatnonzero(rng.random(s.length) < adv.p_e))

    x_key = keys.bob_X ^ guess(keys.charlie_X)
    y_key = keys.bob_Y ^ guess(keys.charlie_Y)
    seed = BitString.random(rng, keys.n)
    h = toeplitz_hash(_hash_spec(seed, x_key), m2)
    return m2, encrypt_digest(make_digest(h, seed), y_key)


def run_session(
    variant: Variant | str,
    keys: KgpOutput,
    message: BitString,
    p_seed: BitString,
    adversary: Optional[AdversaryModel] = None,
    radii: Optional[tuple[int, int]] = None,
    receipts: tuple[str, ...] = ("bob", "charlie"),
) -> SessionResult:
    """Run one signing round end to end.

    ``adversary`` makes Bob malicious toward Charlie.  ``receipts`` lists the
    receivers whose receipt confirmation reaches Alice in the improved
    variant; a missing one terminates the round before publication.
    """
    variant = Variant(variant)
    n = keys.n
    alice = AliceState(keys.X_A, keys.Y_A, p_seed)
    sig, first = sign(alice, message)
    tr = Transcript()
    tr.add(first.sender, first.receiver, first.tag, first.length)

    fwd_m, fwd_s = message, sig
    if adversary is not None:
        fwd_m, fwd_s = _forge(adversary, keys, message, sig)
    tr.add("bob", "charlie", "message_signature", fwd_m.length + fwd_s.body.length)

    if variant is Variant.ORIGINAL:
        tr.add("bob", "charlie", "strings_rates", 3 * n)
        tr.add("charlie", "bob", "strings_rates", 3 * n)
        bob = verify_likely(message, sig, ReceiverState.for_bob(keys), radii)
        charlie = verify_likely(fwd_m, fwd_s, ReceiverState.for_charlie(keys), radii)
    else:
        tr.add("bob", "charlie", "strings", 3 * n)
        if "bob" in receipts:
            tr.add("bob", "alice", "receipt", 0)
        tr.add("charlie", "bob", "strings", 3 * n)
        if "charlie" in receipts:
            tr.add("charlie", "alice", "receipt", 0)
        if not {"bob", "charlie"} <= set(receipts):
            tr.add("alice", "*", "terminate", 0)
            abort = VerifyOutcome(False, 0, aborted=True)
            return SessionResult(abort, abort, tr, sig, (fwd_m, fwd_s))
        tr.add("alice", "bob", "publish", 3 * n)
        tr.add("alice", "charlie", "publish", 3 * n)
        ok_b = verify_improved(message, sig, keys.X_A, keys.Y_A)
        ok_c = verify_improved(fwd_m, fwd_s, keys.X_A, keys.Y_A)
        bob = VerifyOutcome(ok_b, 1, (0, 0) if ok_b else None)
        charlie = VerifyOutcome(ok_c, 1, (0, 0) if ok_c else None)
    tr.add("bob", "-", "accept" if bob.accepted else "reject", 0)
    tr.add("charlie", "-", "accept" if charlie.accepted else "reject", 0)
    return SessionResult(bob, charlie, tr, sig, (fwd_m, fwd_s))
