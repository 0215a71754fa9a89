"""Tests for the approximate-arithmetic scheme."""

from fractions import Fraction

import pytest

from src.algebra import RingElement
from src.config import CKKS_TOLERANCE, DESK_PROFILES
from src.exceptions import LevelExhausted, LevelMismatch, MessageError
from src.he_core import RngStream
from src.scheme_ckks import (
    CKKSCiphertext,
    CKKSParams,
    decode,
    decode_oracle,
    decrypt,
    decrypt_vector,
    decrypt_with_report,
    embed,
    encode,
    encode_oracle,
    encrypt,
    encrypt_vector,
    eval_add,
    eval_mult,
    keygen,
    max_error,
    rescale,
    secret_at,
    tensor,
    within_tolerance,
)


@pytest.fixture(scope="module")
def params():
    return CKKSParams.from_dict(DESK_PROFILES["ckks"])


@pytest.fixture(scope="module")
def keys(params):
    return keygen(params, RngStream.from_int(101))


def _random_slots(rng, count, radius=1.0):
    return [complex(radius * (2 * rng.random() - 1), radius * (2 * rng.random() - 1)) for _ in range(count)]


def test_chain():
    """Test q_l = p^l q0 and the bottom of the chain."""
    params = CKKSParams(n=4, delta=2, p=2, q0=17, L=3, h=2, P=1)
    assert params.q_level(3) == 136
    assert [params.q_level(level) for level in range(4)] == [17, 34, 68, 136]
    with pytest.raises(LevelExhausted):
        params.q_level(-1)


def test_desk_params(params):
    """Test the desk profile values."""
    assert (params.n, params.delta, params.p, params.L) == (16, 2 ** 25, 2 ** 25, 3)
    assert params.q_level(3) == 2 ** 105
    assert params.P == 2 ** 105


def test_encode_constant(params):
    """Test that a constant real vector encodes to the constant polynomial round(delta c)."""
    c = 0.3125
    g = encode([c] * params.slots, params.delta, params.n)
    assert g[0] == round(params.delta * c)
    assert all(v == 0 for v in g[1:])
    assert encode([0] * params.slots, params.delta, params.n) == [0] * params.n
    assert decode([0] * params.n, params.delta, params.n) == [0j] * params.slots


def test_encode_rejects_bad_input(params):
    """Test slot count and finiteness checks."""
    with pytest.raises(MessageError):
        encode([1.0] * 3, params.delta, params.n)
    with pytest.raises(MessageError):
        encode([float("nan")] * params.slots, params.delta, params.n)


def test_encode_matches_oracle(params):
    """Test long-double encode against the mpmath oracle."""
    rng = RngStream.from_int(102)
    for _ in range(20):
        z = _random_slots(rng, params.slots)
        assert encode(z, params.delta, params.n) == encode_oracle(z, params.delta, params.n)


def test_decode_matches_oracle(params):
    """Test long-double decode against the mpmath oracle."""
    rng = RngStream.from_int(103)
    for _ in range(20):
        g = [rng.randint(-2 ** 40, 2 ** 40) for _ in range(params.n)]
        assert max_error(decode(g, params.delta, params.n), decode_oracle(g, params.delta, params.n)) < 1e-7


def test_embedding_is_conjugate_symmetric(params):
    """Test sigma(g)_{n-1-i} = conj sigma(g)_i for integer g."""
    rng = RngStream.from_int(104)
    g = [rng.randint(-1000, 1000) for _ in range(params.n)]
    re, im = embed(g, params.n)
    n = params.n
    for i in range(n):
        assert float(re[n - 1 - i]) == pytest.approx(float(re[i]), abs=1e-9)
        assert float(im[n - 1 - i]) == pytest.approx(-float(im[i]), abs=1e-9)


def test_encode_decode_error(params):
    """Test |decode(encode(z)) - z|_inf <= n / delta over 1000 unit-norm vectors."""
    rng = RngStream.from_int(105)
    for _ in range(1000):
        z = _random_slots(rng, params.slots)
        norm = max(abs(v) for v in z)
        z = [v / norm for v in z]
        back = decode(encode(z, params.delta, params.n), params.delta, params.n)
        assert max_error(back, z) <= params.n / params.delta


def test_roundtrip(keys, params):
    """Test Dec(Enc(z)) within tolerance for 100 vectors."""
    rng = RngStream.from_int(106)
    for _ in range(100):
        z = _random_slots(rng, params.slots)
        ct = encrypt_vector(z, keys, rng)
        assert ct.level == params.L
        assert within_tolerance(decrypt_vector(ct, keys), z)


def test_fresh_noise_small(keys, params):
    """Test Dec(Enc(m)) - m stays within a few hundred per coefficient."""
    rng = RngStream.from_int(107)
    m = encode(_random_slots(rng, params.slots), params.delta, params.n)
    got = decrypt(encrypt(m, keys, rng), keys)
    assert max(abs(a - b) for a, b in zip(got, m)) < 500


def test_encrypt_at_lower_level(keys, params):
    """Test that a ciphertext at level 1 decrypts modulo q_1."""
    rng = RngStream.from_int(108)
    z = _random_slots(rng, params.slots)
    ct = encrypt(encode(z, params.delta, params.n), keys, rng, level=1)
    assert ct.c0.ctx.coeff_modulus == params.q_level(1)
    assert within_tolerance(decrypt_vector(ct, keys), z)


def test_evk_identity(keys, params):
    """Test evk0 + evk1 s = P s^2 + e' mod P q_L."""
    big = params.evk_ring
    s = RingElement.from_ints(big, keys.s.centered())
    e = RingElement.from_ints(big, keys.e_evk.centered())
    assert keys.evk[0] + keys.evk[1] * s == (s * s) * params.P + e
    assert sum(1 for c in keys.s.centered() if c) == params.h
    assert all(c in (-1, 0, 1) for c in keys.s.centered())


def test_add(keys, params):
    """Test Dec(Add) ~ z1 + z2."""
    rng = RngStream.from_int(109)
    for _ in range(20):
        z1, z2 = _random_slots(rng, params.slots), _random_slots(rng, params.slots)
        ct = eval_add(encrypt_vector(z1, keys, rng), encrypt_vector(z2, keys, rng))
        assert within_tolerance(decrypt_vector(ct, keys), [a + b for a, b in zip(z1, z2)])


def test_tensor_identity(keys, params):
    """Test d0 + d1 s + d2 s^2 = ct1(s) ct2(s) mod q_l."""
    rng = RngStream.from_int(110)
    c1 = encrypt_vector(_random_slots(rng, params.slots), keys, rng)
    c2 = encrypt_vector(_random_slots(rng, params.slots), keys, rng)
    s = secret_at(keys, params.L)
    d0, d1, d2 = tensor(c1, c2)
    assert d0 + d1 * s + d2 * s * s == (c1.c0 + c1.c1 * s) * (c2.c0 + c2.c1 * s)


def test_mult_then_rescale(keys, params):
    """Test mult plus one rescale against z1 . z2 at scale delta."""
    rng = RngStream.from_int(111)
    for _ in range(20):
        z1, z2 = _random_slots(rng, params.slots), _random_slots(rng, params.slots)
        product = eval_mult(encrypt_vector(z1, keys, rng), encrypt_vector(z2, keys, rng), keys)
        assert product.scale == Fraction(params.delta) ** 2
        lowered = rescale(product, params.L - 1, params)
        assert lowered.level == params.L - 1
        assert lowered.scale == params.delta
        want = [a * b for a, b in zip(z1, z2)]
        assert max_error(decrypt_vector(lowered, keys), want) <= CKKS_TOLERANCE


def test_rescale_zero_and_limits(keys, params):
    """Test that rescaling zero gives zero and that the chain bottom is enforced."""
    ring = params.ring(1)
    zero = CKKSCiphertext(RingElement.zero(ring), RingElement.zero(ring), 1, Fraction(params.delta))
    lowered = rescale(zero, 0, params)
    assert decrypt(lowered, keys) == [0] * params.n
    with pytest.raises(LevelExhausted):
        rescale(lowered, -1, params)


def test_level_mismatch(keys, params):
    """Test that add and mult refuse ciphertexts at different levels."""
    rng = RngStream.from_int(112)
    z = _random_slots(rng, params.slots)
    top = encrypt_vector(z, keys, rng)
    low = encrypt_vector(z, keys, rng, level=2)
    with pytest.raises(LevelMismatch):
        eval_add(top, low)
    with pytest.raises(LevelMismatch):
        eval_mult(top, low, keys)
    relabelled = CKKSCiphertext(top.c0, top.c1, 2, top.scale)
    with pytest.raises(LevelMismatch):
        decrypt(relabelled, keys)


def test_report(keys, params):
    """Test that the report returns the decrypted polynomial and positive headroom."""
    rng = RngStream.from_int(113)
    ct = encrypt_vector(_random_slots(rng, params.slots), keys, rng)
    values, report = decrypt_with_report(ct, keys)
    assert values == decrypt(ct, keys)
    assert report.correct
    assert report.budget_bits > 50
