"""Tests for the Vandermonde-row asymmetric scheme."""

import numpy as np
import pytest

from src.algebra import as_ints, solve_linear
from src.config import DESK_PROFILES
from src.exceptions import MessageError, ParameterError
from src.he_core import RngStream
from src.scheme_bogdanovlee import (
    BLParams,
    annihilator,
    decrypt,
    decrypt_with_report,
    encrypt,
    equation_count,
    eval_add,
    eval_mult,
    fresh_failure_count,
    keygen,
)


@pytest.fixture(scope="module")
def keys():
    return keygen(BLParams.from_dict(DESK_PROFILES["bogdanov-lee"]), RngStream.from_int(21))


def test_desk_params():
    """Test the desk profile values."""
    params = BLParams.from_dict(DESK_PROFILES["bogdanov-lee"])
    assert (params.n, params.s, params.r, params.q) == (30, 9, 12, 65521)
    assert params.eta == 0.0


def test_params_validation():
    """Test s divisibility and s/3 < r."""
    with pytest.raises(ParameterError):
        BLParams(n=30, s=8, r=12, q=65521, eta=0.0)
    with pytest.raises(ParameterError):
        BLParams(n=30, s=9, r=3, q=65521, eta=0.0)


def test_recipe():
    """Test the parameter recipe at n = 256, alpha = 1/4."""
    params = BLParams.from_recipe(256, 0.25)
    # 256^(1/16) = sqrt(2) rounds up to the smallest multiple of 3
    assert params.s == 3
    assert params.r == 216
    assert params.q == 257
    assert params.eta == pytest.approx(1 / 256 ** (15 / 16))


def test_secret_rows_end_in_zeros(keys):
    """Test the case split of M."""
    M = as_ints(keys.sk.M)
    third = keys.sk.params.third
    for i in range(keys.sk.params.n):
        if i in keys.sk.S:
            assert not np.any(M[i, third:])
        else:
            assert np.all(M[i] != 0)


def test_points_distinct(keys):
    """Test that the evaluation points are distinct and nonzero."""
    a = as_ints(keys.sk.a)
    assert len(set(a.tolist())) == len(a)
    assert np.all(a != 0)


def test_unit_determinant(keys):
    """Test det(R) = 1 and that P and M generate the same code."""
    assert int(np.linalg.det(keys.pk.R)) == 1
    assert np.linalg.matrix_rank(keys.pk.P) == np.linalg.matrix_rank(keys.sk.M)
    assert np.array_equal(keys.pk.P.column_space(), keys.sk.M.column_space())


def test_annihilator_kills_public_rows(keys):
    """Test sum y_i P_i = 0 and sum y_i = 1 over S."""
    y = annihilator(keys.sk, 1)
    S = list(keys.sk.S)
    assert int(y.sum()) == 1
    assert not np.any(y @ keys.pk.P[S])
    assert np.all(y != 0)


def test_solution_space_dimension(keys):
    """Test dim >= s - s/3 - 1 for the degree-1 system."""
    field = type(keys.sk.M)
    a_S = keys.sk.a[list(keys.sk.S)]
    rows = [field.Ones(9)] + [a_S ** j for j in range(1, equation_count(keys.sk.params, 1) + 1)]
    A = field(np.stack([as_ints(r) for r in rows]))
    rhs = field.Zeros(A.shape[0])
    rhs[0] = 1
    assert solve_linear(A, rhs, mode="basis").dimension >= 9 - 3 - 1


def test_roundtrip_noiseless(keys):
    """Test decryption at eta = 0."""
    rng = RngStream.from_int(22)
    for _ in range(20):
        m = rng.randbelow(65521)
        assert decrypt(encrypt(m, keys.pk, rng), keys.sk) == m


def test_constant_ciphertext(keys):
    """Test that c = m 1 decrypts to m."""
    c = encrypt(77, keys.pk, RngStream.from_int(23), zero_x=True)
    assert np.all(c == 77)
    assert decrypt(c, keys.sk) == 77
    with pytest.raises(MessageError):
        encrypt(65521, keys.pk, RngStream.from_int(23))


def test_add_and_mult(keys):
    """Test the additive law and products at degree_cap 2."""
    rng = RngStream.from_int(24)
    for _ in range(10):
        a, b = rng.randbelow(65521), rng.randbelow(65521)
        ca, cb = encrypt(a, keys.pk, rng), encrypt(b, keys.pk, rng)
        assert decrypt(eval_add(ca, cb), keys.sk) == (a + b) % 65521
        assert decrypt(eval_mult(ca, cb), keys.sk, degree_cap=2) == (a * b) % 65521


def test_zero_times_anything(keys):
    """Test that a noiseless zero absorbs products."""
    rng = RngStream.from_int(25)
    zero = encrypt(0, keys.pk, rng, zero_x=True)
    assert decrypt(eval_mult(zero, encrypt(123, keys.pk, rng)), keys.sk, degree_cap=2) == 0


def test_noise_rate_matches_eta(keys):
    """Test that the fraction of nonzero error entries tracks eta."""
    rng = RngStream.from_int(26)
    trials, eta = 400, 0.1
    nonzero = 0
    for _ in range(trials):
        c = encrypt(0, keys.pk, rng, zero_x=True, eta=eta)
        nonzero += int(np.count_nonzero(c))
    total = trials * 30
    sigma = (total * eta * (1 - eta)) ** 0.5
    assert abs(nonzero - total * eta) <= 3 * sigma


def test_failure_rate_matches_binomial(keys):
    """Test the fresh failure rate against 1 - (1 - eta)^s."""
    trials, eta = 1000, 0.1
    failures = fresh_failure_count(keys, RngStream.from_int(27), trials, eta)
    expected = 1 - (1 - eta) ** 9
    sigma = (trials * expected * (1 - expected)) ** 0.5
    assert abs(failures - trials * expected) <= 3 * sigma


def test_report_agrees_with_decrypt(keys):
    """Test that the report flags noisy restrictions and never changes the message."""
    rng = RngStream.from_int(28)
    clean = encrypt(5, keys.pk, rng)
    message, report = decrypt_with_report(clean, keys.sk)
    assert message == decrypt(clean, keys.sk) == 5
    assert report.correct and report.observed == 0
    noisy = clean.copy()
    noisy[keys.sk.S[0]] += type(noisy)(1)
    message, report = decrypt_with_report(noisy, keys.sk)
    assert message == decrypt(noisy, keys.sk)
    assert not report.correct
