"""Rates, noise summaries and the self-test property matrix."""

import logging
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd
from statsmodels.stats.proportion import proportion_confint

from src.config import ALPHA

logger = logging.getLogger(__name__)

STATUS_ORDER = ("fail", "pass", "measured", "skipped")


def calculate_rate(
    successes: int, trials: int, method: str = "wilson"
) -> Tuple[float, float, float]:
    """Calculate a rate with its confidence interval.

    Args:
        successes: Number of events counted
        trials: Number of trials
        method: statsmodels interval method ('wilson', 'normal', 'beta', ...)

    Returns:
        Tuple of (rate, lower_ci, upper_ci)
    """
    if trials == 0:
        return (0.0, 0.0, 0.0)
    rate = successes / trials
    lower, upper = proportion_confint(successes, trials, alpha=ALPHA, method=method)
    return (rate, float(max(0.0, lower)), float(min(1.0, upper)))


def rate_table(counts: pd.DataFrame) -> pd.DataFrame:
    """Add rate and interval columns to a frame with ``events`` and ``trials`` columns."""
    table = counts.copy()
    ci_results = table.apply(lambda row: calculate_rate(int(row["events"]), int(row["trials"])), axis=1)
    table[["rate", "ci_lower", "ci_upper"]] = pd.DataFrame(ci_results.tolist(), index=table.index)
    return table


def noise_summary(noise_df: pd.DataFrame) -> pd.DataFrame:
    """Mean/max observed noise and remaining budget per scheme, op and step."""
    summary = noise_df.groupby(["scheme", "op", "step"]).agg(
        observed_mean=("observed", "mean"),
        observed_max=("observed", "max"),
        bound=("bound", "first"),
        budget_bits_min=("budget_bits", "min"),
        correct_rate=("correct", "mean"),
        samples=("observed", "count"),
    ).reset_index()
    summary["log2_observed"] = np.log2(summary["observed_mean"].clip(lower=1e-300))
    return summary.sort_values(["scheme", "op", "step"]).reset_index(drop=True)


def growth_law(summary: pd.DataFrame) -> pd.DataFrame:
    """Fitted log2-noise slope per step for every (scheme, op) series.

    The slope is a measurement only; additions should come out near
    log2((k+1)/k) per step, products much steeper.
    """
    rows = []
    for (scheme, op), group in summary.groupby(["scheme", "op"]):
        if len(group) < 2:
            continue
        slope, intercept = np.polyfit(group["step"].to_numpy(float), group["log2_observed"].to_numpy(float), 1)
        rows.append({"scheme": scheme, "op": op, "log2_slope": float(slope), "log2_intercept": float(intercept),
                     "steps": int(len(group))})
    law = pd.DataFrame(rows, columns=["scheme", "op", "log2_slope", "log2_intercept", "steps"])
    for row in law.itertuples():
        logger.warning(f"measured noise law {row.scheme}/{row.op}: {row.log2_slope:+.3f} bits per step")
    return law


def property_matrix(results: pd.DataFrame) -> pd.DataFrame:
    """Scheme x property table of statuses ('-' where a property does not apply)."""
    if results.empty:
        return pd.DataFrame()
    matrix = results.pivot_table(index="scheme", columns="property", values="status",
                                 aggfunc=lambda s: min(s, key=STATUS_ORDER.index))
    return matrix.fillna("-")


def overall_status(results: pd.DataFrame) -> Dict:
    """Status counts and the overall verdict."""
    counts = results["status"].value_counts().to_dict() if not results.empty else {}
    return {
        "total": int(len(results)),
        "passed": int(counts.get("pass", 0)),
        "failed": int(counts.get("fail", 0)),
        "measured": int(counts.get("measured", 0)),
        "skipped": int(counts.get("skipped", 0)),
        "all_passed": int(counts.get("fail", 0)) == 0,
        "failures": results.loc[results["status"] == "fail", ["scheme", "property"]].values.tolist()
        if not results.empty else [],
    }


def error_summary(errors: Sequence[float]) -> Dict:
    """Distribution of approximate-arithmetic errors."""
    values = np.asarray(list(errors), dtype=float)
    if values.size == 0:
        return {"count": 0, "mean": np.nan, "median": np.nan, "p95": np.nan, "max": np.nan, "log2_max": np.nan}
    return {
        "count": int(values.size),
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "p95": float(np.percentile(values, 95)),
        "max": float(values.max()),
        "log2_max": float(np.log2(values.max())) if values.max() > 0 else -np.inf,
    }
