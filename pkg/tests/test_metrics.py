"""Tests for metrics calculation module."""

import numpy as np
import pandas as pd
import pytest

from src.metrics import (
    calculate_rate,
    error_summary,
    growth_law,
    noise_summary,
    overall_status,
    property_matrix,
    rate_table,
)


def test_calculate_rate():
    """Test rate calculation with confidence intervals."""
    rate, lower, upper = calculate_rate(10, 100)
    assert rate == 0.1
    assert 0 < lower < rate < upper < 1

    rate, lower, upper = calculate_rate(0, 0)
    assert (rate, lower, upper) == (0.0, 0.0, 0.0)

    rate, lower, upper = calculate_rate(0, 100)
    assert rate == 0.0
    assert lower == pytest.approx(0.0, abs=1e-12)
    assert 0.0 < upper < 0.1

    rate, lower, upper = calculate_rate(100, 100)
    assert rate == 1.0
    assert upper == pytest.approx(1.0)


def test_rate_table():
    """Test rate and interval columns are appended per row."""
    counts = pd.DataFrame({"label": ["a", "b"], "events": [5, 50], "trials": [100, 100]})
    table = rate_table(counts)
    assert table["rate"].tolist() == [0.05, 0.5]
    assert (table["ci_lower"] <= table["rate"]).all()
    assert (table["rate"] <= table["ci_upper"]).all()
    assert "rate" not in counts.columns


def _noise_frame():
    rows = []
    for step in (1, 2, 3):
        for sample in range(2):
            rows.append({"scheme": "bfv", "op": "add", "step": step, "observed": 2.0 ** step * (1 + sample),
                         "bound": 1024.0, "budget_bits": 10 - step, "correct": True})
    return pd.DataFrame(rows)


def test_noise_summary():
    """Test grouping per step with mean, max and minimum budget."""
    summary = noise_summary(_noise_frame())
    assert summary["step"].tolist() == [1, 2, 3]
    assert summary["observed_mean"].tolist() == [3.0, 6.0, 12.0]
    assert summary["observed_max"].tolist() == [4.0, 8.0, 16.0]
    assert summary["samples"].tolist() == [2, 2, 2]
    assert summary["correct_rate"].tolist() == [1.0, 1.0, 1.0]


def test_growth_law_slope():
    """Test that doubling noise per step fits a slope of one bit."""
    law = growth_law(noise_summary(_noise_frame()))
    assert len(law) == 1
    assert law.loc[0, "log2_slope"] == pytest.approx(1.0)
    assert law.loc[0, "steps"] == 3


def _results():
    return pd.DataFrame([
        {"scheme": "bfv", "property": "roundtrip", "status": "pass", "trials": 10, "value": 1.0, "detail": ""},
        {"scheme": "bfv", "property": "mult", "status": "fail", "trials": 10, "value": 0.9, "detail": "9/10"},
        {"scheme": "cg-vector", "property": "mult", "status": "measured", "trials": 10, "value": 0.5,
         "detail": ""},
        {"scheme": "cg-vector", "property": "roundtrip", "status": "pass", "trials": 10, "value": 1.0,
         "detail": ""},
    ])


def test_property_matrix():
    """Test the scheme x property pivot with '-' for missing cells."""
    results = pd.concat([_results(), pd.DataFrame([
        {"scheme": "bfv", "property": "refresh", "status": "pass", "trials": 1, "value": 1.0, "detail": ""},
    ])], ignore_index=True)
    matrix = property_matrix(results)
    assert matrix.loc["bfv", "mult"] == "fail"
    assert matrix.loc["cg-vector", "mult"] == "measured"
    assert matrix.loc["cg-vector", "refresh"] == "-"


def test_property_matrix_keeps_worst_status():
    """Test duplicate rows reduce to the most severe status."""
    results = pd.DataFrame([
        {"scheme": "bfv", "property": "add", "status": "pass", "trials": 1, "value": 1.0, "detail": ""},
        {"scheme": "bfv", "property": "add", "status": "fail", "trials": 1, "value": 0.0, "detail": ""},
    ])
    assert property_matrix(results).loc["bfv", "add"] == "fail"


def test_overall_status():
    """Test status counts and the failure list."""
    status = overall_status(_results())
    assert status["total"] == 4
    assert status["passed"] == 2
    assert status["failed"] == 1
    assert status["measured"] == 1
    assert not status["all_passed"]
    assert status["failures"] == [["bfv", "mult"]]


def test_error_summary():
    """Test error distribution statistics and the empty case."""
    summary = error_summary([0.25, 0.5, 1.0, 0.125])
    assert summary["count"] == 4
    assert summary["max"] == 1.0
    assert summary["log2_max"] == 0.0
    assert np.isnan(error_summary([])["mean"])
