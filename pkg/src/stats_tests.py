"""Statistical checks for measured failure rates and error trends."""

import logging
import math
from typing import Dict, Sequence

import numpy as np
from scipy import stats

from src.config import ALPHA, N_SIGMA

logger = logging.getLogger(__name__)


def expected_failure_rate(eta: float, s: int) -> float:
    """Probability that at least one of s noisy positions is hit: 1 - (1 - eta)^s."""
    return 1.0 - (1.0 - eta) ** s


def binomial_sigma_check(
    events: int, trials: int, p: float, n_sigma: float = N_SIGMA
) -> Dict:
    """Check an observed count against Binomial(trials, p) within n_sigma standard deviations.

    Args:
        events: Observed count
        trials: Number of trials
        p: Expected probability per trial
        n_sigma: Width of the tolerance band

    Returns:
        Dictionary with the band, z-score, exact binomial p-value and verdict
    """
    if trials == 0:
        return {"within": False, "z": np.nan, "p_value": 1.0, "error": "Zero trials"}

    mean = trials * p
    sigma = math.sqrt(trials * p * (1 - p))
    if sigma == 0:
        within = events == mean
        z = 0.0 if within else math.inf
    else:
        z = (events - mean) / sigma
        within = abs(z) <= n_sigma

    p_value = stats.binomtest(events, trials, p).pvalue if 0 < p < 1 else float(within)
    return {
        "events": events,
        "trials": trials,
        "observed_rate": events / trials,
        "expected_rate": p,
        "expected_count": mean,
        "sigma": sigma,
        "z": z,
        "n_sigma": n_sigma,
        "within": bool(within),
        "p_value": float(p_value),
    }


def two_proportion_z_test(
    n1: int, x1: int, n2: int, x2: int
) -> Dict:
    """Perform two-proportion z-test.

    Args:
        n1: Sample size for group 1
        x1: Number of successes in group 1
        n2: Sample size for group 2
        x2: Number of successes in group 2

    Returns:
        Dictionary with test results
    """
    if n1 == 0 or n2 == 0:
        return {
            "statistic": np.nan,
            "p_value": 1.0,
            "significant": False,
            "error": "Zero sample size",
        }

    p1 = x1 / n1
    p2 = x2 / n2
    p_pooled = (x1 + x2) / (n1 + n2)
    se = np.sqrt(p_pooled * (1 - p_pooled) * (1 / n1 + 1 / n2))

    if se == 0:
        return {
            "statistic": 0.0,
            "p_value": 1.0,
            "significant": False,
            "p1": p1,
            "p2": p2,
            "difference": p1 - p2,
            "error": "Zero standard error",
        }

    z_stat = (p1 - p2) / se
    p_value = 2 * (1 - stats.norm.cdf(abs(z_stat)))

    return {
        "statistic": z_stat,
        "p_value": p_value,
        "significant": p_value < ALPHA,
        "p1": p1,
        "p2": p2,
        "difference": p1 - p2,
    }


def trend_test(x: Sequence[float], y: Sequence[float]) -> Dict:
    """Monotone trend of y in x via Spearman rank correlation."""
    if len(x) < 3:
        return {"rho": 0.0, "p_value": 1.0, "direction": "insufficient_data", "significant": False}

    rho, p_value = stats.spearmanr(x, y)
    if np.isnan(rho):
        rho, p_value = 0.0, 1.0
    direction = "increasing" if rho > 0 else "decreasing" if rho < 0 else "stable"
    return {
        "rho": float(rho),
        "p_value": float(p_value),
        "direction": direction,
        "significant": p_value < ALPHA,
    }
