"""Tests for envelopes, key bundles, codecs, seeded randomness and dispatch."""

import math

import pytest

from src.config import DESK_PROFILES
from src.exceptions import (
    BudgetExceeded,
    Corrupt,
    EncryptionBudgetExceeded,
    ParameterError,
    SchemeMismatch,
    UnsupportedOp,
    VersionMismatch,
)
from src.he_core import (
    SCHEME_CATALOGUE,
    CiphertextEnvelope,
    EncryptionLedger,
    KeyBundle,
    NoiseReport,
    RngStream,
    SchemeId,
    eval_dispatch,
    get_adapter,
    int_width,
    next_gamma,
    pack_bigints,
    pack_bits,
    pack_ints,
    seed_from_int,
    unpack_bigints,
    unpack_bits,
    unpack_ints,
)


def test_scheme_codes_and_catalogue():
    """Test every scheme has a stable code and catalogue entry."""
    for scheme in SchemeId:
        assert SchemeId.from_code(scheme.code) is scheme
        assert scheme in SCHEME_CATALOGUE
    with pytest.raises(Corrupt):
        SchemeId.from_code(0)


def test_envelope_bytes():
    """Test the envelope header round-trip and its digest."""
    envelope = CiphertextEnvelope(SchemeId.BFV, b"payload", gamma=3, level=1, arity=2)
    data = envelope.to_bytes()
    assert data[0] == 1
    assert CiphertextEnvelope.from_bytes(data) == envelope
    assert envelope.digest() == CiphertextEnvelope.from_bytes(data).digest()
    assert envelope.with_metadata(gamma=4).gamma == 4


def test_envelope_rejects_bad_bytes():
    """Test wrong versions, truncation and bad arity."""
    data = CiphertextEnvelope(SchemeId.BFV, b"payload").to_bytes()
    with pytest.raises(VersionMismatch):
        CiphertextEnvelope.from_bytes(b"\x09" + data[1:])
    with pytest.raises(Corrupt):
        CiphertextEnvelope.from_bytes(data[:-1])
    with pytest.raises(Corrupt):
        CiphertextEnvelope.from_bytes(data[:3])
    with pytest.raises(Corrupt):
        CiphertextEnvelope.from_bytes(b"")
    with pytest.raises(ParameterError):
        CiphertextEnvelope(SchemeId.BFV, b"", arity=4)


def test_key_bundle_bytes():
    """Test key bundle serialization and section checks."""
    bundle = KeyBundle(SchemeId.CKKS, {"n": 16}, seed_from_int(5), {"pk": b"\x01\x02", "evk": b"\x03"})
    data = bundle.to_bytes()
    assert KeyBundle.from_bytes(data) == bundle
    with pytest.raises(Corrupt):
        KeyBundle.from_bytes(data + b"\x00")
    with pytest.raises(Corrupt):
        KeyBundle.from_bytes(data[:-1])
    with pytest.raises(VersionMismatch):
        KeyBundle.from_bytes(b"\x02" + data[1:])


def test_int_codecs():
    """Test fixed-width, big-integer and bit codecs."""
    assert int_width(256) == 1
    assert int_width(257) == 2
    assert unpack_ints(pack_ints([1, 255, 7], 1), 1, 3) == [1, 255, 7]
    with pytest.raises(Corrupt):
        unpack_ints(b"\x00\x01\x02", 2)
    with pytest.raises(Corrupt):
        unpack_ints(pack_ints([1, 2], 1), 1, 3)

    values = [0, -1, 2 ** 200, -(3 ** 90)]
    assert unpack_bigints(pack_bigints(values)) == values
    with pytest.raises(Corrupt):
        unpack_bigints(pack_bigints(values)[:-2])

    bits = [1, 0, 1, 1, 0, 0, 0, 0, 1]
    assert unpack_bits(pack_bits(bits), 9).tolist() == bits
    with pytest.raises(Corrupt):
        unpack_bits(pack_bits(bits), 17)


def test_rng_stream_determinism():
    """Test identical seeds give identical streams and forks are independent."""
    a, b = RngStream.from_int(9), RngStream.from_int(9)
    assert a.read(100) == b.read(100)
    assert [a.randbelow(1000) for _ in range(20)] == [b.randbelow(1000) for _ in range(20)]
    assert RngStream.from_int(9).fork("x").read(32) != RngStream.from_int(9).fork("y").read(32)
    with pytest.raises(ParameterError):
        RngStream(b"short")
    with pytest.raises(ParameterError):
        seed_from_int(-1)


def test_rng_stream_ranges():
    """Test samplers stay inside their ranges."""
    rng = RngStream.from_int(10)
    assert all(0 <= rng.randbelow(7) < 7 for _ in range(200))
    assert all(-3 <= rng.randint(-3, 3) <= 3 for _ in range(200))
    assert set(rng.ternary(300)) == {-1, 0, 1}
    assert sorted(rng.permutation(10)) == list(range(10))
    sample = rng.sample(20, 5)
    assert len(set(sample)) == 5
    assert all(0 <= rng.random() < 1 for _ in range(100))
    assert all(abs(rng.discrete_gaussian(2.0)) <= 12 for _ in range(200))
    assert rng.discrete_gaussian(0.0) == 0


def test_rng_stream_uniformity():
    """Test bit frequencies stay near one half."""
    rng = RngStream.from_int(11)
    ones = sum(rng.bits(4000))
    assert abs(ones - 2000) < 4 * math.sqrt(1000)


def test_noise_report_budget():
    """Test remaining budget in bits."""
    assert NoiseReport(SchemeId.BFV, 4.0, 64.0, True).budget_bits == 4.0
    assert NoiseReport(SchemeId.BFV, 128.0, 64.0, False).budget_bits == -1.0
    assert NoiseReport(SchemeId.BFV, 0.0, 64.0, True).budget_bits == math.inf


def test_encryption_ledger():
    """Test enforced limits, warn-only limits and counting."""
    ledger = EncryptionLedger(limit=2, label="test")
    ledger.record()
    ledger.record()
    with pytest.raises(EncryptionBudgetExceeded):
        ledger.record()

    lenient = EncryptionLedger(limit=1, enforce=False, label="test")
    lenient.record()
    assert lenient.record() == 2

    unlimited = EncryptionLedger(warn_at=2)
    assert [unlimited.record() for _ in range(3)] == [1, 2, 3]


def test_next_gamma():
    """Test add takes the max and mult sums."""
    assert next_gamma("add", [1, 3]) == 3
    assert next_gamma("mult", [1, 3]) == 4
    assert next_gamma("refresh", [2]) == 2


def test_adapter_keygen_is_deterministic():
    """Test identical (params, seed) give identical key files and loading checks the scheme."""
    adapter = get_adapter(SchemeId.INTPOLY)
    params = {"ell": 64, "a": 1, "degree": 3, "noise_bits": 8}
    first = adapter.keygen(params, seed_from_int(1))
    second = adapter.keygen(params, seed_from_int(1))
    assert first.to_bytes() == second.to_bytes()
    with pytest.raises(SchemeMismatch):
        get_adapter(SchemeId.BFV).load(first)


def test_adapter_ledger_follows_the_key_bundle():
    """Test reloading the same bundle shares one ledger and a fresh keygen starts a new one."""
    adapter = type(get_adapter(SchemeId.ARMKNECHT))()
    bundle = adapter.keygen(DESK_PROFILES["armknecht"], seed_from_int(3))
    ledger = adapter.ledger(adapter.load(bundle))
    ledger.record()
    ledger.record()

    reloaded = KeyBundle.from_bytes(bundle.to_bytes())
    assert adapter.ledger(adapter.load(reloaded)) is ledger
    assert ledger.limit == DESK_PROFILES["armknecht"]["L"]

    adapter.keygen(DESK_PROFILES["armknecht"], seed_from_int(3))
    assert adapter.ledger(adapter.load(bundle)).count == 0

    assert get_adapter(SchemeId.INTPOLY).ledger(object()) is None


def test_eval_dispatch_errors():
    """Test unknown ops, unsupported ops, arity and scheme mixing."""
    adapter = get_adapter(SchemeId.INTPOLY)
    bundle = adapter.keygen({"ell": 64, "a": 1, "degree": 3, "noise_bits": 8}, seed_from_int(2))
    rng = RngStream.from_int(3)
    ct = adapter.encrypt([1, 0, 1, 0], bundle, rng)
    with pytest.raises(UnsupportedOp):
        eval_dispatch("divide", [ct, ct], bundle)
    with pytest.raises(UnsupportedOp):
        eval_dispatch("rescale", [ct], bundle)
    with pytest.raises(ParameterError):
        eval_dispatch("add", [ct], bundle)
    other = CiphertextEnvelope(SchemeId.BFV, ct.payload)
    with pytest.raises(SchemeMismatch):
        eval_dispatch("add", [ct, other], bundle)


def test_eval_dispatch_gamma_budget():
    """Test products beyond the Armknecht budget are refused."""
    adapter = get_adapter(SchemeId.ARMKNECHT)
    bundle = adapter.keygen({"s": 8, "mu": 2, "L": 20, "q": 251, "rho": 1, "n": 60}, seed_from_int(4))
    rng = RngStream.from_int(5)
    c1, c2, c3 = (adapter.encrypt(m, bundle, rng) for m in (3, 5, 7))
    product = eval_dispatch("mult", [c1, c2], bundle)
    assert product.gamma == 2
    assert adapter.decrypt(product, bundle) == 15
    with pytest.raises(BudgetExceeded):
        eval_dispatch("mult", [product, c3], bundle)
