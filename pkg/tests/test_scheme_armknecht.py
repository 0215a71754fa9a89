"""Tests for the Reed-Muller evaluation-code scheme."""

import math

import galois
import numpy as np
import pytest

from src.config import DESK_PROFILES
from src.exceptions import (
    BudgetExceeded,
    EncryptionBudgetExceeded,
    GammaExceeded,
    MessageError,
    ParameterError,
)
from src.he_core import EncryptionLedger, RngStream, seed_from_int
from src.scheme_armknecht import (
    ArmknechtAdapter,
    ArmknechtCiphertext,
    ArmknechtParams,
    decrypt,
    encrypt,
    error_support,
    eval_add,
    eval_mult,
    good_location_count,
    keygen,
    length_bound,
    param_search,
    q_condition_exact,
    q_condition_log,
)


@pytest.fixture(scope="module")
def desk_key():
    params = ArmknechtParams.from_dict(DESK_PROFILES["armknecht"])
    return keygen(params, RngStream.from_int(7))


def test_desk_params_derive_T():
    """Test the good-location count of the desk profile."""
    params = ArmknechtParams.from_dict(DESK_PROFILES["armknecht"])
    assert params.T == good_location_count(60, 20, 251) == 39
    assert params.n - params.T >= params.L + 1


def test_params_reject_bad_shapes():
    """Test parameter validation."""
    # Test with T too large for n and L
    with pytest.raises(ParameterError):
        ArmknechtParams(s=8, mu=2, L=50, q=251, rho=1, n=60, T=20)
    # Test with rho not below q
    with pytest.raises(ParameterError):
        ArmknechtParams(s=8, mu=1, L=2, q=3, rho=3, n=10)


def test_key_has_disjoint_first_coordinate(desk_key):
    """Test that y_1 differs from every x_i1."""
    assert desk_key.y[0] not in set(int(v) for v in desk_key.x[:, 0])
    assert len(desk_key.I) == desk_key.params.T
    assert len({tuple(p) for p in desk_key.x.tolist()}) == desk_key.params.n


def test_roundtrip(desk_key):
    """Test Dec(Enc(m)) = m on random messages."""
    rng = RngStream.from_int(11)
    for _ in range(20):
        m = rng.randbelow(251)
        assert decrypt(encrypt(m, desk_key, rng), desk_key) == m


def test_boundary_messages(desk_key):
    """Test messages 0 and q - 1."""
    rng = RngStream.from_int(12)
    assert decrypt(encrypt(0, desk_key, rng), desk_key) == 0
    assert decrypt(encrypt(250, desk_key, rng), desk_key) == 250
    with pytest.raises(MessageError):
        encrypt(251, desk_key, rng)


def test_add_and_mult(desk_key):
    """Test homomorphic addition and one multiplication."""
    rng = RngStream.from_int(13)
    for _ in range(10):
        a, b = rng.randbelow(251), rng.randbelow(251)
        ca, cb = encrypt(a, desk_key, rng), encrypt(b, desk_key, rng)
        assert decrypt(eval_add(ca, cb), desk_key) == (a + b) % 251
        product = eval_mult(ca, cb, desk_key.params.mu)
        assert product.gamma == 2
        assert decrypt(product, desk_key) == (a * b) % 251


def test_prime_power_field_plaintext_model():
    """Test add and mult over GF(2^8) follow field arithmetic, not integers mod q."""
    adapter = ArmknechtAdapter()
    params = dict(DESK_PROFILES["armknecht"], q=256)
    keys = adapter.load(adapter.keygen(params, seed_from_int(5)))
    gf = galois.GF(256)
    rng = RngStream.from_int(17)
    a, b = adapter.encrypt_envelope(200, keys, rng), adapter.encrypt_envelope(100, keys, rng)
    assert adapter.decrypt_envelope(a, keys) == 200

    total = adapter.decrypt_envelope(adapter.evaluate("add", [a, b], keys), keys)
    assert total == adapter.expected("add", [200, 100], keys) == 200 ^ 100 == 172
    product = adapter.decrypt_envelope(adapter.evaluate("mult", [a, b], keys), keys)
    assert product == adapter.expected("mult", [200, 100], keys) == int(gf(200) * gf(100))


def test_mult_budget(desk_key):
    """Test that a third factor exceeds mu = 2."""
    rng = RngStream.from_int(14)
    c = encrypt(3, desk_key, rng)
    square = eval_mult(c, c, desk_key.params.mu)
    with pytest.raises(BudgetExceeded):
        eval_mult(square, c, desk_key.params.mu)
    with pytest.raises(GammaExceeded):
        decrypt(ArmknechtCiphertext(c.c, gamma=3), desk_key)


def test_error_support_outside_good_set(desk_key):
    """Test that errors never touch the good locations."""
    rng = RngStream.from_int(15)
    ct = encrypt(42, desk_key, rng)
    errors = set(error_support(ct, desk_key))
    assert not errors & set(desk_key.I)
    # Uniform error values vanish with probability 1/q each
    assert len(errors) >= desk_key.params.n - desk_key.params.T - 3


def test_all_good_key_has_no_errors():
    """Test the degenerate key where every location is good."""
    params = ArmknechtParams.from_dict(DESK_PROFILES["armknecht"])
    key = keygen(params, RngStream.from_int(16), all_good=True)
    ct = encrypt(9, key, RngStream.from_int(17))
    assert error_support(ct, key) == ()
    assert decrypt(ct, key) == 9


def test_encryption_ledger_limit(desk_key):
    """Test that the L-th encryption succeeds and the next one fails."""
    rng = RngStream.from_int(18)
    ledger = EncryptionLedger(limit=desk_key.params.L, label="test")
    for _ in range(desk_key.params.L):
        encrypt(1, desk_key, rng, ledger=ledger)
    with pytest.raises(EncryptionBudgetExceeded):
        encrypt(1, desk_key, rng, ledger=ledger)


def test_keygen_is_deterministic():
    """Test that one seed gives one key."""
    params = ArmknechtParams.from_dict(DESK_PROFILES["armknecht"])
    k1 = keygen(params, RngStream.from_int(19))
    k2 = keygen(params, RngStream.from_int(19))
    assert k1.y == k2.y and k1.I == k2.I
    assert np.array_equal(k1.x, k2.x)


def test_length_bound_values():
    """Test the code-length bound at small parameters."""
    # rho = 1: 2^(s/4) * C(3 + 2 mu, 3)
    assert length_bound(8, 1, 1) == pytest.approx(4.0 * 10)
    assert length_bound(16, 2, 1) == pytest.approx(16.0 * 35)


def test_param_search_small():
    """Test the parameter search for s = 8, mu = 1."""
    result = param_search(8, 1)
    assert result.rho_min == 1
    assert result.n_min == pytest.approx(40.0)
    assert q_condition_log(result.q_min, 8, 1, 1) <= -8
    assert q_condition_log(result.q_min - 1, 8, 1, 1) > -8 or not galois.is_prime_power(result.q_min - 1)


def test_param_search_agrees_with_exact_check():
    """Test that the float search agrees with the rational re-check."""
    result = param_search(16, 2)
    assert result.rho_min == 2
    assert q_condition_exact(result.q_min, 16, 2, result.rho_min)


def test_q_condition_monotone():
    """Test that larger q makes the condition easier."""
    values = [q_condition_log(q, 8, 1, 1) for q in (50, 100, 200, 400)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert math.isfinite(values[0])