import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qds_forge.bitcore import BitString, Gf2Poly, gen_irreducible
from qds_forge.lfsr_hash import (
    Digest,
    HashOperator,
    HashSpec,
    Signature,
    collision_bound,
    decrypt_signature,
    encrypt_digest,
    log2_collision_bound,
    make_digest,
    split_digest,
    toeplitz_hash,
    toeplitz_matrix,
)


@st.composite
def hash_case(draw, max_n=40, max_m=300):
    n = draw(st.integers(2, max_n))
    seed = BitString(draw(st.integers(0, (1 << n) - 1)), n)
    poly = gen_irreducible(seed, n)
    init = BitString(draw(st.integers(0, (1 << n) - 1)), n)
    m = draw(st.integers(1, max_m))
    msg = BitString(draw(st.integers(0, (1 << m) - 1)), m)
    return HashSpec(poly, init), msg


@given(hash_case())
def test_streaming_matches_sequence_oracle(case):
    spec, msg = case
    want = oracles.toeplitz_oracle(spec.poly.coeffs, list(spec.init), list(msg))
    assert list(toeplitz_hash(spec, msg)) == want


@given(hash_case(max_n=12, max_m=40))
def test_matrix_is_toeplitz_and_matches(case):
    spec, msg = case
    H = toeplitz_matrix(spec, msg.length)
    n, m = spec.n, msg.length
    for r in range(1, n):
        for k in range(1, m):
            assert H[r][k] == H[r - 1][k - 1]
    assert [row[0] for row in H] == list(spec.init)
    h = [sum(H[r][k] & msg[k] for k in range(m)) % 2 for r in range(n)]
    assert list(toeplitz_hash(spec, msg)) == h


@given(hash_case())
def test_operator_matches_streaming(case):
    spec, msg = case
    op = HashOperator(spec.poly, msg)
    assert op.apply(spec.init) == toeplitz_hash(spec, msg)


def test_operator_wide_polynomial():
    rng = np.random.default_rng(3)
    for n in (63, 64, 65, 100):
        poly = gen_irreducible(BitString.random(rng, n), n)
        msg = BitString.random(rng, 500)
        key = BitString.random(rng, n)
        assert HashOperator(poly, msg).apply(key) == toeplitz_hash(HashSpec(poly, key), msg)


@given(hash_case(), st.data())
def test_linear_in_message(case, data):
    spec, m1 = case
    m2 = BitString(data.draw(st.integers(0, (1 << m1.length) - 1)), m1.length)
    assert toeplitz_hash(spec, m1 ^ m2) == toeplitz_hash(spec, m1) ^ toeplitz_hash(spec, m2)


@given(hash_case(), st.data())
def test_linear_in_key(case, data):
    spec, msg = case
    k2 = BitString(data.draw(st.integers(0, (1 << spec.n) - 1)), spec.n)
    lhs = toeplitz_hash(HashSpec(spec.poly, spec.init ^ k2), msg)
    assert lhs == toeplitz_hash(spec, msg) ^ toeplitz_hash(HashSpec(spec.poly, k2), msg)


def test_zero_message_hashes_to_zero():
    spec = HashSpec(Gf2Poly.from_exponents(8, 4, 3, 1, 0), BitString.from_str("10110011"))
    assert toeplitz_hash(spec, BitString.zeros(100)) == BitString.zeros(8)


def test_single_bit_message_reads_a_column():
    spec = HashSpec(Gf2Poly.from_exponents(4, 1, 0), BitString.from_str("1000"))
    H = toeplitz_matrix(spec, 6)
    for k in range(6):
        e = BitString(1 << k, 6)
        assert list(toeplitz_hash(spec, e)) == [H[r][k] for r in range(4)]


def test_reducible_polynomial_rejected():
    with pytest.raises(ValueError):
        HashSpec(Gf2Poly.from_exponents(4, 0), BitString.zeros(4))


def test_init_length_checked():
    with pytest.raises(ValueError):
        HashSpec(Gf2Poly.from_exponents(3, 1, 0), BitString.zeros(4))


def test_empty_message_rejected():
    spec = HashSpec(Gf2Poly.from_exponents(3, 1, 0), BitString.zeros(3))
    with pytest.raises(ValueError):
        toeplitz_hash(spec, BitString.zeros(0))


@pytest.mark.parametrize(
    "m,n,want",
    [(256, 16, 256 / 2**15), (1, 128, 2.0**-127), (2**20, 16, 1.0), (10**20, 128, 10**20 / 2**127), (3, 2, 1.0)],
)
def test_collision_bound(m, n, want):
    assert collision_bound(m, n) == pytest.approx(want, rel=1e-15)


def test_log2_collision_bound():
    assert log2_collision_bound(1, 10**6) == -(10**6 - 1)
    assert log2_collision_bound(2**40, 16) == 0.0


@given(st.integers(1, 64), st.data())
def test_sign_roundtrip(n, data):
    h = BitString(data.draw(st.integers(0, (1 << n) - 1)), n)
    seed = BitString(data.draw(st.integers(0, (1 << n) - 1)), n)
    pad = BitString(data.draw(st.integers(0, (1 << 2 * n) - 1)), 2 * n)
    d = make_digest(h, seed)
    assert split_digest(d.bits) == d
    sig = encrypt_digest(d, pad)
    assert decrypt_signature(sig, pad) == d
    assert Signature.from_bytes(sig.to_bytes()) == sig
    assert Digest.from_bytes(d.to_bytes()) == d


def test_digest_layout_hash_then_seed():
    d = make_digest(BitString.from_str("1100"), BitString.from_str("0001"))
    assert str(d.bits) == "11000001"
