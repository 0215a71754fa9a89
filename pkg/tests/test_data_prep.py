"""Tests for data preparation module."""

import json

import pytest

from src.data_prep import (
    coerce_param_value,
    format_envelope,
    load_message,
    load_params,
    parse_envelope,
    parse_seed,
    read_json,
    ledger_path,
    read_key_bundle,
    read_ledger_count,
    write_key_bundle,
    write_ledger_count,
)
from src.exceptions import Corrupt, ParameterError
from src.he_core import CiphertextEnvelope, KeyBundle, SchemeId, seed_from_int


def test_coerce_param_value():
    """Test numeric and boolean strings become numbers and booleans."""
    assert coerce_param_value("12") == 12
    assert coerce_param_value("-3") == -3
    assert coerce_param_value("3.2") == 3.2
    assert coerce_param_value("1e-3") == 0.001
    assert coerce_param_value("yes") is True
    assert coerce_param_value("False") is False
    assert coerce_param_value("desk") == "desk"
    assert coerce_param_value({"n": "16", "xs": ["1", "2"]}) == {"n": 16, "xs": [1, 2]}
    assert coerce_param_value(7) == 7


def test_parse_seed_forms():
    """Test decimal, hex and integer seeds."""
    assert parse_seed(7) == seed_from_int(7)
    assert parse_seed("7") == seed_from_int(7)
    hex_seed = "ab" * 32
    assert parse_seed(hex_seed) == bytes.fromhex(hex_seed)
    assert parse_seed("0x" + hex_seed) == bytes.fromhex(hex_seed)
    assert len(parse_seed("0")) == 32


@pytest.mark.parametrize("bad", ["", "seven", "-1", "ab" * 31, str(2 ** 256)])
def test_parse_seed_rejects(bad):
    """Test malformed seeds raise ParameterError."""
    with pytest.raises(ParameterError):
        parse_seed(bad)


def test_load_params_from_profile_and_file(tmp_path):
    """Test profile defaults, plain files and profile-shaped files."""
    assert load_params(SchemeId.BFV, profile="desk")["n"] == 16

    plain = tmp_path / "bfv.json"
    plain.write_text(json.dumps({"n": "32", "q_bits": 40, "p": 2}))
    assert load_params(SchemeId.BFV, plain) == {"n": 32, "q_bits": 40, "p": 2}

    shaped = tmp_path / "profile.json"
    shaped.write_text(json.dumps({"bfv": {"n": 64, "p": 2, "q_bits": 50}, "ckks": {"n": 8}}))
    assert load_params(SchemeId.BFV, shaped)["n"] == 64


def test_load_params_errors(tmp_path):
    """Test broken JSON, non-object documents and missing files."""
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(Corrupt):
        load_params(SchemeId.BFV, broken)

    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")
    with pytest.raises(ParameterError):
        load_params(SchemeId.BFV, listing)

    with pytest.raises(FileNotFoundError):
        read_json(tmp_path / "missing.json")


def test_load_message():
    """Test inline messages and the exactly-one-source rule."""
    assert load_message("[1, 0, 1]") == [1, 0, 1]
    with pytest.raises(ParameterError):
        load_message()
    with pytest.raises(Corrupt):
        load_message("[1, 0,")


@pytest.mark.parametrize("fmt", ["json", "hex"])
def test_envelope_text_formats(fmt):
    """Test both ciphertext renderings parse back to the same envelope."""
    envelope = CiphertextEnvelope(SchemeId.INTPOLY, b"\x01\x02\x03", gamma=2, level=0, arity=1)
    text = format_envelope(envelope, fmt)
    assert parse_envelope(text) == envelope
    if fmt == "json":
        doc = json.loads(text)
        assert doc["scheme"] == "intpoly"
        assert doc["gamma"] == 2
        assert doc["digest"] == envelope.digest()


def test_parse_envelope_rejects_garbage():
    """Test non-hex text and documents without an envelope field."""
    with pytest.raises(Corrupt):
        parse_envelope("zz-not-hex")
    with pytest.raises(Corrupt):
        parse_envelope('{"scheme": "bfv"}')


@pytest.mark.parametrize("fmt", ["json", "hex"])
def test_key_file_round_trip(tmp_path, fmt):
    """Test key files written in either format read back unchanged."""
    bundle = KeyBundle(SchemeId.BFV, {"n": 16, "p": 256, "q_bits": 30}, seed_from_int(3), {"pk": b"\x00\x01"})
    path = write_key_bundle(bundle, tmp_path / "key.json", fmt)
    assert read_key_bundle(path) == bundle


def test_key_file_corrupt(tmp_path):
    """Test a key document without its key field is reported as Corrupt."""
    path = tmp_path / "key.json"
    path.write_text('{"scheme": "bfv"}')
    with pytest.raises(Corrupt):
        read_key_bundle(path)


def test_ledger_sidecar(tmp_path, caplog):
    """Test the encryption count is stored beside the key and tied to its digest."""
    key = tmp_path / "key.json"
    assert ledger_path(key) == tmp_path / "key.json.ledger"
    assert read_ledger_count(key, "ab" * 32) == 0

    write_ledger_count(key, "ab" * 32, 7)
    assert read_ledger_count(key, "ab" * 32) == 7
    with caplog.at_level("WARNING"):
        assert read_ledger_count(key, "cd" * 32) == 0
    assert "starting from 0" in caplog.text

    ledger_path(key).write_text("{not json")
    with pytest.raises(Corrupt):
        read_ledger_count(key, "ab" * 32)
