"""Tests for the integer-polynomial scheme with refresh."""

import itertools

import pytest
from sympy import isprime

from src.config import DESK_PROFILES
from src.exceptions import MessageError, ParameterError
from src.he_core import RngStream
from src.scheme_intpoly import (
    IntPolyCiphertext,
    IntPolyKey,
    IntPolyParams,
    carryless_product,
    decrypt,
    decrypt_with_report,
    encrypt,
    eval_add,
    eval_mult,
    keygen,
    observed_noise,
    refresh,
    xor_sum,
)


@pytest.fixture(scope="module")
def key():
    return keygen(IntPolyParams.from_dict(DESK_PROFILES["intpoly"]), RngStream.from_int(51))


@pytest.fixture
def toy_key():
    return IntPolyKey(params=IntPolyParams(ell=4, noise_bits=0), S_k=11, z=3)


def test_keygen_sizes(key):
    """Test the bit lengths of S_k and z."""
    assert key.S_k.bit_length() == 64
    assert isprime(key.S_k)
    assert key.R_k % key.S_k == 0
    assert key.z.bit_length() == 6


def test_gamma():
    """Test gamma = ceil(log2 ell)."""
    assert IntPolyParams(ell=8, noise_bits=2).gamma == 3
    assert IntPolyParams(ell=64).gamma == 6
    with pytest.raises(ParameterError):
        IntPolyParams(ell=8, noise_bits=8)


def test_zero_noise_hook(toy_key):
    """Test m = 1 + x with u = 0 and d = x."""
    ct = encrypt([1, 1], toy_key, RngStream.from_int(52), u=[0, 0], d=[0, 1])
    assert ct.coeffs == (1, 12)
    assert decrypt(ct, toy_key) == [1, 1]


def test_refresh_example(toy_key):
    """Test the reduction 45 -> 12 mod 33."""
    ct = IntPolyCiphertext((45,), noise_bound=1)
    fresh = refresh(ct, toy_key)
    assert fresh.coeffs == (12,)
    assert 45 % 11 == 12 % 11 == 1
    assert refresh(fresh, toy_key) == fresh


def test_roundtrip(key):
    """Test Dec(Enc(m)) = m on random messages."""
    rng = RngStream.from_int(53)
    for _ in range(50):
        msg = rng.bits(4)
        assert decrypt(encrypt(msg, key, rng), key) == msg
    assert decrypt(encrypt([0, 0, 0, 0], key, rng), key) == [0, 0, 0, 0]


def test_rejects_non_bits(key):
    """Test message validation."""
    with pytest.raises(MessageError):
        encrypt([2, 0], key, RngStream.from_int(54))


def test_plain_polynomial_decrypts(key):
    """Test that c = m decrypts to m and adding multiples of S_k changes nothing."""
    ct = IntPolyCiphertext((1, 0, 1), noise_bound=1)
    assert decrypt(ct, key) == [1, 0, 1]
    shifted = IntPolyCiphertext((1 + 7 * key.S_k, -3 * key.S_k, 1 + key.S_k), noise_bound=1)
    assert decrypt(shifted, key) == [1, 0, 1]


def test_overflow_breaks_decryption(toy_key):
    """Test that noise beyond S_k/2 flips a bit."""
    # y = 1 + 2*3 = 7 wraps to -4 mod 11
    ct = encrypt([1], toy_key, RngStream.from_int(55), u=[3], d=[1])
    assert decrypt(ct, toy_key) == [0]
    _, report = decrypt_with_report(ct, toy_key)
    assert not report.correct


def test_homomorphism_exhaustive_degree_3(key):
    """Test xor and carry-less products for every pair of degree-3 messages."""
    rng = RngStream.from_int(56)
    space = [list(bits) for bits in itertools.product((0, 1), repeat=4)]
    for m1, m2 in itertools.product(space, repeat=2):
        c1, c2 = encrypt(m1, key, rng), encrypt(m2, key, rng)
        assert decrypt(eval_add(c1, c2), key) == xor_sum(m1, m2)
        assert decrypt(eval_mult(c1, c2), key) == carryless_product(m1, m2)


def test_refresh_invariance(key):
    """Test Dec(Refresh(c)) = Dec(c) after products."""
    rng = RngStream.from_int(57)
    for _ in range(50):
        c = eval_mult(encrypt(rng.bits(4), key, rng), encrypt(rng.bits(4), key, rng))
        fresh = refresh(c, key)
        assert decrypt(fresh, key) == decrypt(c, key)
        assert all(abs(v) <= key.R_k // 2 for v in fresh.coeffs)


def test_noise_tracker_bounds_true_noise(key):
    """Test that the tracked bound dominates the observed noise on random circuits."""
    rng = RngStream.from_int(58)
    for _ in range(100):
        ct = encrypt(rng.bits(4), key, rng)
        for _ in range(rng.randint(1, 3)):
            other = encrypt(rng.bits(4), key, rng)
            ct = eval_add(ct, other) if rng.randbelow(2) else eval_mult(ct, other)
        if ct.noise_bound < key.S_k // 2:
            assert observed_noise(ct, key) <= ct.noise_bound


def test_report_matches_decrypt(key):
    """Test that the report returns the same message."""
    rng = RngStream.from_int(59)
    ct = encrypt([1, 0, 1, 1], key, rng)
    message, report = decrypt_with_report(ct, key)
    assert message == decrypt(ct, key) == [1, 0, 1, 1]
    assert report.correct
    assert report.budget_bits > 40
