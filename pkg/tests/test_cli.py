"""Tests for the command-line front end."""

import json

import pytest

from src.cli import main
from src.config import DESK_PROFILES
from src.he_core import RngStream, SchemeId, get_adapter, seed_from_int


def _keygen(tmp_path, scheme, seed="7", fmt="json", name="key.json"):
    path = tmp_path / name
    assert main(["keygen", "--scheme", scheme, "--seed", seed, "--out", str(path), "--format", fmt]) == 0
    return path


def _encrypt(tmp_path, key, message, seed, name):
    out = tmp_path / name
    code = main(["encrypt", "--key", str(key), "--message", json.dumps(message), "--seed", seed, "--out", str(out)])
    assert code == 0
    return out


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_keygen_is_deterministic(tmp_path):
    """Test two keygen runs with the same seed write identical key files."""
    first = _keygen(tmp_path, "bfv", name="a.json")
    second = _keygen(tmp_path, "bfv", name="b.json")
    assert first.read_bytes() == second.read_bytes()
    assert json.loads(first.read_text())["scheme"] == "bfv"


@pytest.mark.parametrize("scheme", [s.value for s in SchemeId])
def test_encrypt_decrypt_identity(tmp_path, capsys, scheme):
    """Test CLI encrypt then decrypt returns the message at the desk profile."""
    key = _keygen(tmp_path, scheme)
    adapter = get_adapter(SchemeId(scheme))
    keys = adapter.keygen(DESK_PROFILES[scheme], seed_from_int(7))
    message = adapter.format_message(adapter.random_message(RngStream.from_int(1), adapter.load(keys)))
    ct = _encrypt(tmp_path, key, message, "11", "ct.json")
    capsys.readouterr()
    assert main(["decrypt", "--key", str(key), "--ct", str(ct)]) == 0
    got = json.loads(capsys.readouterr().out)
    assert adapter.messages_match(adapter.parse_message(got, adapter.load(keys)),
                                  adapter.parse_message(message, adapter.load(keys)), adapter.load(keys))


def test_encrypt_is_seeded(tmp_path):
    """Test the same encryption seed gives the same ciphertext."""
    key = _keygen(tmp_path, "intpoly")
    first = _encrypt(tmp_path, key, [1, 0, 1], "5", "a.json")
    second = _encrypt(tmp_path, key, [1, 0, 1], "5", "b.json")
    third = _encrypt(tmp_path, key, [1, 0, 1], "6", "c.json")
    assert first.read_text() == second.read_text()
    assert first.read_text() != third.read_text()


def test_hex_formats(tmp_path, capsys):
    """Test hex key files and hex ciphertexts."""
    key = _keygen(tmp_path, "cg-matrix", fmt="hex", name="key.hex")
    assert not key.read_text().startswith("{")
    out = tmp_path / "ct.hex"
    assert main(["encrypt", "--key", str(key), "--message", "[1, 0, 1, 1]", "--seed", "3",
                 "--format", "hex", "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["decrypt", "--key", str(key), "--ct", str(out)]) == 0
    assert json.loads(capsys.readouterr().out) == [1, 0, 1, 1]


def test_challagunta_variant(tmp_path):
    """Test --variant selects the Challagunta scheme."""
    path = tmp_path / "key.json"
    assert main(["keygen", "--scheme", "challagunta", "--variant", "matrix", "--seed", "1", "--out", str(path)]) == 0
    assert json.loads(path.read_text())["scheme"] == "cg-matrix"


def test_eval_add_and_mult(tmp_path, capsys):
    """Test homomorphic evaluation through files."""
    key = _keygen(tmp_path, "cg-matrix")
    a = _encrypt(tmp_path, key, [1, 1, 0, 1], "1", "a.json")
    b = _encrypt(tmp_path, key, [0, 1, 1, 1], "2", "b.json")
    for op, want in (("add", [1, 0, 1, 0]), ("mult", [0, 1, 0, 1])):
        out = tmp_path / f"{op}.json"
        assert main(["eval", op, "--key", str(key), "--ct", str(a), str(b), "--out", str(out)]) == 0
        capsys.readouterr()
        assert main(["decrypt", "--key", str(key), "--ct", str(out)]) == 0
        assert json.loads(capsys.readouterr().out) == want


def test_eval_budget_exceeded_exits_1(tmp_path, capsys):
    """Test an Armknecht product past mu fails with BudgetExceeded."""
    key = _keygen(tmp_path, "armknecht")
    cts = [_encrypt(tmp_path, key, m, str(m), f"c{m}.json") for m in (2, 3, 4)]
    product = tmp_path / "product.json"
    assert main(["eval", "mult", "--key", str(key), "--ct", str(cts[0]), str(cts[1]), "--out", str(product)]) == 0
    capsys.readouterr()
    assert main(["eval", "mult", "--key", str(key), "--ct", str(product), str(cts[2])]) == 1
    assert _error(capsys)["error"] == "BudgetExceeded"


def test_malformed_input_exits_2(tmp_path, capsys):
    """Test corrupt ciphertexts, bad messages, missing files and bad seeds."""
    key = _keygen(tmp_path, "intpoly")
    bad = tmp_path / "bad.json"
    bad.write_text("not hex at all")
    assert main(["decrypt", "--key", str(key), "--ct", str(bad)]) == 2
    assert _error(capsys)["error"] == "Corrupt"

    assert main(["encrypt", "--key", str(key), "--message", "[2, 7]", "--seed", "1"]) == 2
    assert _error(capsys)["error"] == "MessageError"

    assert main(["decrypt", "--key", str(tmp_path / "missing.json"), "--ct", str(bad)]) == 2
    assert _error(capsys)["error"] == "FileNotFoundError"

    assert main(["keygen", "--scheme", "bfv", "--seed", "x", "--out", str(tmp_path / "k")]) == 2
    assert _error(capsys)["error"] == "ParameterError"

    assert main(["keygen", "--scheme", "nope", "--seed", "1", "--out", str(tmp_path / "k")]) == 2


def test_armknecht_limit_holds_across_invocations(tmp_path, capsys):
    """Test encrypt refuses the (L+1)-th encryption under one key file."""
    key = _keygen(tmp_path, "armknecht")
    limit = DESK_PROFILES["armknecht"]["L"]
    for i in range(limit):
        _encrypt(tmp_path, key, i, str(100 + i), "ct.json")
    assert json.loads((tmp_path / "key.json.ledger").read_text())["count"] == limit
    capsys.readouterr()

    assert main(["encrypt", "--key", str(key), "--message", "1", "--seed", "999"]) == 1
    assert _error(capsys)["error"] == "EncryptionBudgetExceeded"
    assert json.loads((tmp_path / "key.json.ledger").read_text())["count"] == limit

    assert main(["encrypt", "--key", str(key), "--message", "1", "--seed", "999", "--allow-over-limit"]) == 0
    assert json.loads((tmp_path / "key.json.ledger").read_text())["count"] == limit + 1


def test_rank_ideal_encryptions_are_counted(tmp_path):
    """Test keys without a hard limit still record their encryption count."""
    key = _keygen(tmp_path, "rank-ideal")
    n = DESK_PROFILES["rank-ideal"]["n"]
    for seed in ("1", "2", "3"):
        _encrypt(tmp_path, key, [0] * n, seed, "ct.json")
    assert json.loads((tmp_path / "key.json.ledger").read_text())["count"] == 3


def test_schemes_without_ledger_write_no_sidecar(tmp_path):
    """Test encrypt leaves no ledger file for schemes that do not count encryptions."""
    key = _keygen(tmp_path, "intpoly")
    _encrypt(tmp_path, key, [1, 0, 1], "5", "ct.json")
    assert not (tmp_path / "key.json.ledger").exists()


def test_seed_is_mandatory(tmp_path):
    """Test randomized subcommands refuse to run without a seed."""
    with pytest.raises(SystemExit):
        main(["keygen", "--scheme", "bfv", "--out", str(tmp_path / "k")])
    with pytest.raises(SystemExit):
        main(["selftest", "--quick"])


def test_params_advise(capsys):
    """Test advisor output and exit status."""
    assert main(["params", "advise", "--scheme", "rank-ideal", "--set", "w=2", "--set", "m=11"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["derived"]["operational_min_m"] == 9

    assert main(["params", "advise", "--scheme", "bfv"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["warnings"]

    assert main(["params", "advise", "--scheme", "armknecht", "--set", "s"]) == 2


def test_vectors_emit_and_check(tmp_path, capsys):
    """Test emitted vectors check out and tampering is reported."""
    out = tmp_path / "vectors"
    assert main(["vectors", "emit", "--scheme", "intpoly", "cg-matrix", "--seed", "4", "--out-dir", str(out)]) == 0
    assert main(["vectors", "check", "--dir", str(out)]) == 0

    path = out / "intpoly.json"
    doc = json.loads(path.read_text())
    doc["cases"][0]["expected_plaintext"] = [9]
    path.write_text(json.dumps(doc))
    capsys.readouterr()
    assert main(["vectors", "check", str(path)]) == 1
    assert "expected_plaintext" in capsys.readouterr().out


def test_selftest_subset(tmp_path, capsys):
    """Test a quick selftest prints the property matrix and exits 0."""
    code = main(["selftest", "--scheme", "cg-matrix", "--quick", "--seed", "2", "--no-studies", "--no-figures",
                 "--out-dir", str(tmp_path)])
    assert code == 0
    assert "exhaustive-mult" in capsys.readouterr().out
