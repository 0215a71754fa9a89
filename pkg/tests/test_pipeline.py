"""Tests for the self-test pipeline."""

import pandas as pd
import pytest

from src.he_core import RngStream, SchemeId
from src.pipeline import (
    Keyring,
    generate_summary,
    run_selftest,
    study_ckks_trend,
    study_noise_growth,
    suite_advisor,
    suite_bfv_boundary,
    suite_budget_law,
    suite_exhaustive_cg,
    suite_reed_decoder,
    trials_for,
)
from src.config import DESK_PROFILES
from src.metrics import overall_status, property_matrix

QUICK_SCHEMES = [SchemeId.CG_MATRIX, SchemeId.INTPOLY, SchemeId.BFV]


@pytest.fixture(scope="module")
def quick_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("reports")
    return run_selftest(schemes=QUICK_SCHEMES, quick=True, seed=3, out_dir=out, studies=False, figures=False), out


def test_trials_for():
    """Test full and quick trial counts."""
    assert trials_for("failure_rate", quick=False) == 10_000
    assert trials_for("failure_rate", quick=True) < 10_000


def test_quick_selftest_passes(quick_run):
    """Test a quick run over three schemes passes every asserted property."""
    outcome, _ = quick_run
    status = outcome["status"]
    assert status["all_passed"], status["failures"]
    assert set(outcome["results"]["scheme"]) == {s.value for s in QUICK_SCHEMES}
    assert outcome["matrix"].loc["cg-matrix", "exhaustive-mult"] == "pass"
    assert outcome["matrix"].loc["intpoly", "refresh-invariance"] == "pass"
    assert outcome["matrix"].loc["bfv", "noise-above-bound"] == "pass"


def test_quick_selftest_writes_reports(quick_run):
    """Test CSV, parquet and markdown outputs."""
    outcome, out = quick_run
    assert (out / "selftest_results.csv").exists()
    assert (out / "property_matrix.csv").exists()
    assert outcome["summary_path"].read_text().startswith("# he-zoo Self-Test Summary")
    frame = pd.read_parquet(out / "selftest_results.parquet")
    assert list(frame.columns) == ["scheme", "property", "status", "trials", "value", "detail"]
    assert len(frame) == len(outcome["results"])


def test_keyring_rekeys_before_ledger_runs_out():
    """Test Armknecht keys are replaced before the L-th encryption."""
    ring = Keyring(SchemeId.ARMKNECHT, DESK_PROFILES["armknecht"], RngStream.from_int(4))
    first = ring.bundle
    for _ in range(DESK_PROFILES["armknecht"]["L"] + 5):
        ring.reserve(1)
        message = ring.message()
        assert ring.decrypt(ring.encrypt(message)) == message
    assert ring.rekeys == 1
    assert ring.bundle != first


def test_budget_law_suite():
    """Test random circuits within the budget and refusal beyond it."""
    ring = Keyring(SchemeId.ARMKNECHT, DESK_PROFILES["armknecht"], RngStream.from_int(5))
    rows = suite_budget_law(ring, 10)
    assert [r["status"] for r in rows] == ["pass", "pass"]


def test_exhaustive_cg_matrix():
    """Test all 256 message pairs of RM(1,3)."""
    ring = Keyring(SchemeId.CG_MATRIX, DESK_PROFILES["cg-matrix"], RngStream.from_int(6))
    rows = suite_exhaustive_cg(ring, ("add", "mult"))
    assert [(r["trials"], r["status"]) for r in rows] == [(256, "pass"), (256, "pass")]


def test_bfv_boundary_suite():
    """Test planted noise on both sides of the decryption bound."""
    ring = Keyring(SchemeId.BFV, DESK_PROFILES["bfv"], RngStream.from_int(7))
    assert all(r["status"] == "pass" for r in suite_bfv_boundary(ring, 20))


def test_reed_decoder_suite():
    """Test the substrate decoder rows report no silent wrong decodes."""
    rows = suite_reed_decoder(RngStream.from_int(8), 100)
    assert len(rows) == 3
    assert rows[0]["trials"] == 16 * 9
    assert all(r["status"] == "pass" and r["detail"].startswith("0 ") for r in rows)


def test_advisor_suite():
    """Test log2(delta) and the Armknecht search agree with the advisor."""
    assert all(r["status"] == "pass" for r in suite_advisor(quick=True))


def test_noise_growth_study():
    """Test every noise-study scheme reports add and mult series."""
    noise = study_noise_growth(RngStream.from_int(9), quick=True)
    assert set(noise["scheme"]) == {"bfv", "ckks", "intpoly", "mvideal"}
    assert set(noise["op"]) == {"add", "mult"}
    assert (noise["bound"] > 0).all()


def test_ckks_trend_study():
    """Test the pipeline error grows with sigma."""
    rows, errors = study_ckks_trend(RngStream.from_int(10), quick=True)
    assert set(errors["factor"]) == {"sigma", "delta_log2"}
    by_property = {r["property"]: r for r in rows}
    assert by_property["trend-sigma"]["status"] == "pass"
    assert by_property["trend-scale"]["value"] < 0


def test_generate_summary():
    """Test the markdown summary lists failures and measured rows."""
    results = pd.DataFrame([
        {"scheme": "bfv", "property": "mult", "status": "fail", "trials": 4, "value": 0.5, "detail": "2/4 agree"},
        {"scheme": "cg-vector", "property": "mult", "status": "measured", "trials": 4, "value": 0.25,
         "detail": "1/4 agree"},
    ])
    summary = generate_summary(results, property_matrix(results), overall_status(results))
    assert "**Verdict**: FAIL" in summary
    assert "- bfv / mult: 2/4 agree" in summary
    assert "cg-vector / mult" in summary
    assert "| ckks | polynomial | asymmetric | approximate |" in summary
