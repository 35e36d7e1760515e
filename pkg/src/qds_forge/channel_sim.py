"""Statistical stand-in for the key-generation channel, plus attack simulators.

No photonics here: raw keys are uniform random strings and each receiver's
copy differs from Alice's by injected bit flips, either an exact count
(``floor(length * rate)`` positions, chosen without replacement) or i.i.d.
Bernoulli flips.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .bitcore import BitString, hamming_distance
from .seeding import rng_for

__all__ = [
    "ErrorMode",
    "KgpOutput",
    "AdversaryKind",
    "AdversaryModel",
    "simulate_kgp",
    "guessing_attack",
    "tamper_attack",
    "TamperResult",
]


class ErrorMode(str, enum.Enum):
    EXACT_COUNT = "exact_count"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class KgpOutput:
    """Correlated raw keys of one signing round.

    ``rates`` are the nominal (e1, e2, e3, e4) the receivers use to size
    their likely sets; ``errors`` are the realized flip counts.
    """

    alice_XB: BitString
    bob_X: BitString
    alice_XC: BitString
    charlie_X: BitString
    alice_YB: BitString
    bob_Y: BitString
    alice_YC: BitString
    charlie_Y: BitString
    rates: tuple[float, float, float, float]
    errors: tuple[int, int, int, int] = field(default=(0, 0, 0, 0))

    @property
    def n(self) -> int:
        return self.alice_XB.length

    @property
    def X_A(self) -> BitString:
        return self.alice_XB ^ self.alice_XC

    @property
    def Y_A(self) -> BitString:
        return self.alice_YB ^ self.alice_YC

    def realized_errors(self) -> tuple[int, int, int, int]:
        return (
            hamming_distance(self.alice_XB, self.bob_X),
            hamming_distance(self.alice_YB, self.bob_Y),
            hamming_distance(self.alice_XC, self.charlie_X),
            hamming_distance(self.alice_YC, self.charlie_Y),
        )


def _check_rate(e: float) -> None:
    if not 0.0 <= e < 0.5:
        raise ValueError(f"bit-flip rate {e} outside [0, 0.5)")


def _noisy_copy(rng: np.random.Generator, s: BitString, rate: float, mode: ErrorMode) -> BitString:
    if mode is ErrorMode.EXACT_COUNT:
        k = int(np.floor(s.length * rate))
        pos = rng.choice(s.length, size=k, replace=False) if k else []
    else:
        pos = np.flatnonzero(rng.random(s.length) < rate)
    return s.flip(int(p) for p in pos)


def simulate_kgp(
    n: int,
    rates: tuple[float, float, float, float],
    mode: ErrorMode | str = ErrorMode.EXACT_COUNT,
    seed: int = 0,
) -> KgpOutput:
    """Draw Alice's raw keys and the receivers' noisy copies.

    X strings have n bits and Y strings 2n bits; e1/e2 perturb Bob's X/Y,
    e3/e4 perturb Charlie's.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    for e in rates:
        _check_rate(e)
    mode = ErrorMode(mode)
    e1, e2, e3, e4 = rates
    rng = rng_for(seed, "kgp")
    axb = BitString.random(rng, n)
    axc = BitString.random(rng, n)
    ayb = BitString.random(rng, 2 * n)
    ayc = BitString.random(rng, 2 * n)
    bx = _noisy_copy(rng, axb, e1, mode)
    by = _noisy_copy(rng, ayb, e2, mode)
    cx = _noisy_copy(rng, axc, e3, mode)
    cy = _noisy_copy(rng, ayc, e4, mode)
    out = KgpOutput(axb, bx, axc, cx, ayb, by, ayc, cy, tuple(rates))
    return KgpOutput(**{**out.__dict__, "errors": out.realized_errors()})


class AdversaryKind(str, enum.Enum):
    GUESS_KEYS = "guess_keys"
    TAMPER_MESSAGE = "tamper_message"
    FORGE_PAIR = "forge_pair"


@dataclass(frozen=True)
class AdversaryModel:
    """A malicious Bob.

    guess_keys: guesses Charlie's strings bitwise with error rate ``p_e`` and
    signs a fresh message with the resulting likely-set centers.
    tamper_message: forwards a modified message with the genuine signature.
    forge_pair: forwards a modified message and a modified signature.
    """

    kind: AdversaryKind
    p_e: float = 0.25
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", AdversaryKind(self.kind))


def guessing_attack(bob_view, p_e: float, trials: int, seed: int = 0) -> float:
    """Fraction of trials in which Bob reproduces Charlie's X string exactly.

    Each trial Bob's guess of every bit of Charlie's string is wrong with
    independent probability ``p_e``.  ``bob_view`` is a ReceiverState whose
    ``X_peer`` holds Charlie's string (the ground truth Bob is aiming at);
    it is only read.
    """
    if not 0.0 < p_e <= 0.5:
        raise ValueError(f"p_e {p_e} outside (0, 0.5]")
    target = bob_view.X_peer
    n = target.length
    hits = 0
    for t in range(trials):
        rng = rng_for(seed, "guess", t)
        wrong = rng.random(n) < p_e
        guess = target.flip(int(i) for i in np.flatnonzero(wrong))
        hits += guess == target
    return hits / trials if trials else 0.0


@dataclass(frozen=True)
class TamperResult:
    trials: int
    accepted: int

    @property
    def rate(self) -> float:
        return self.accepted / self.trials if self.trials else 0.0


def tamper_attack(
    fixture,
    strategy: str = "random_message",
    trials: int = 1000,
    seed: int = 0,
    variant: str = "original",
    radii: tuple[int, int] | None = None,
    degenerate: bool = False,
) -> TamperResult:
    """Acceptance frequency of adversarial (M', S') at Charlie.

    ``fixture(rng) -> (keys, message, p_seed)`` builds a fresh honest round;
    the attacker replaces the message with a random different one
    (``random_message``) or also re-randomizes the signature
    (``random_pair``).  ``degenerate=True`` keeps M' = M as a control.
    """
    from .protocol import AliceState, ReceiverState, sign, verify_improved, verify_likely

    if strategy not in ("random_message", "random_pair"):
        raise ValueError(f"unknown strategy {strategy!r}")
    accepted = 0
    for t in range(trials):
        rng = rng_for(seed, "tamper", t)
        keys, message, p_seed = fixture(rng)
        alice = AliceState(keys.X_A, keys.Y_A, p_seed)
        sig, _ = sign(alice, message)
        m2 = message
        if not degenerate:
            while m2 == message:
                m2 = BitString.random(rng, message.length)
        sig2 = sig
        if strategy == "random_pair" and not degenerate:
            from .lfsr_hash import Signature

            sig2 = Signature(BitString.random(rng, sig.body.length))
        if variant == "original":
            charlie = ReceiverState.for_charlie(keys)
            ok = verify_likely(m2, sig2, charlie, radii=radii).accepted
        else:
            ok = verify_improved(m2, sig2, keys.X_A, keys.Y_A)
        accepted += ok
    return TamperResult(trials, accepted)
