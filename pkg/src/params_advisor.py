"""Parameter derivation and validation across schemes.

Each advisor takes a plain dict of inputs and returns an :class:`AdviceReport`
with the derived parameters, every checked inequality with its margin, and
warnings. Inequalities are evaluated in log space; rational ones are
re-evaluated with ``fractions.Fraction`` and the lattice relation with 200-bit
``mpmath``, and a disagreement is reported as a failed check.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Union

import mpmath

from src.config import LINDNER_PEIKERT_NUMERATOR, LINDNER_PEIKERT_OFFSET, MVIDEAL_HEADROOM
from src.exceptions import ParameterError
from src.he_core import SchemeId
from src.scheme_armknecht import (
    good_location_count,
    length_bound,
    length_upper_bound,
    param_search,
    q_condition_exact,
    q_condition_log,
)
from src.scheme_bfv import BFVParams, security_check
from src.scheme_bogdanovlee import INSECURE_NOTICE, BLParams
from src.scheme_challagunta import rm_dimension, select_rm
from src.scheme_ckks import CKKSParams
from src.scheme_intpoly import IntPolyParams
from src.scheme_mvideal import MVIdealParams
from src.scheme_rankideal import operational_min_m, stated_min_m

logger = logging.getLogger(__name__)

RECHECK_PRECISION = 200  # bits


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: Optional[float] = None
    detail: str = ""


@dataclass
class AdviceReport:
    scheme: str
    inputs: Dict[str, Any]
    derived: Dict[str, Any] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add_check(self, name: str, passed: bool, margin: Optional[float] = None, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), margin, detail))

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable({
            "scheme": self.scheme,
            "inputs": self.inputs,
            "derived": self.derived,
            "checks": [asdict(c) for c in self.checks],
            "warnings": self.warnings,
            "passed": self.passed,
        })


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else "-inf" if value < 0 else "nan"
    return value


def _require(inputs: Dict[str, Any], *names: str) -> None:
    missing = [n for n in names if n not in inputs]
    if missing:
        raise ParameterError(f"missing advisor inputs: {', '.join(missing)}")


def _recheck(report: AdviceReport, name: str, log_verdict: bool, exact_verdict: bool) -> None:
    report.add_check(f"{name} (exact re-check)", log_verdict == exact_verdict,
                     detail=f"log-space {'pass' if log_verdict else 'fail'}, "
                            f"exact {'pass' if exact_verdict else 'fail'}")


# ---------------------------------------------------------------------------
# Per-scheme advisors
# ---------------------------------------------------------------------------


def advise_armknecht(inputs: Dict[str, Any]) -> AdviceReport:
    _require(inputs, "s", "mu")
    s, mu = int(inputs["s"]), int(inputs["mu"])
    report = AdviceReport(SchemeId.ARMKNECHT.value, dict(inputs))
    result = param_search(s, mu)
    report.derived.update({"n_min": result.n_min, "rho_min": result.rho_min, "q_min": result.q_min,
                           "n_upper": length_upper_bound(s, mu)})

    log_value = q_condition_log(result.q_min, s, mu, result.rho_min)
    log_ok = log_value <= -s
    report.add_check("q_min condition <= 2^-s", log_ok, margin=-s - log_value)
    _recheck(report, "q_min condition", log_ok, q_condition_exact(result.q_min, s, mu, result.rho_min))

    bound = length_bound(s, mu, result.rho_min)
    report.add_check("n_min <= closed-form upper bound", bound <= report.derived["n_upper"],
                     margin=report.derived["n_upper"] - bound)

    if "L" in inputs:
        L = int(inputs["L"])
        n = int(inputs.get("n", max(math.ceil(result.n_min), L + 2)))
        T = good_location_count(n, L, result.q_min)
        report.derived.update({"n": n, "L": L, "T": T})
        report.add_check("T >= 1 good locations", T >= 1, margin=T - 1)
        report.warnings.append(f"at most L={L} ciphertexts may be published under one key")
    return report


def advise_bogdanov_lee(inputs: Dict[str, Any]) -> AdviceReport:
    _require(inputs, "n")
    n = int(inputs["n"])
    alpha = float(inputs.get("alpha", 0.25))
    report = AdviceReport(SchemeId.BOGDANOV_LEE.value, dict(inputs))
    params = BLParams.from_recipe(n, alpha)
    report.derived.update({"n": params.n, "s": params.s, "r": params.r, "q": params.q, "eta": params.eta})
    report.add_check("s divisible by 3", params.s % 3 == 0)
    report.add_check("s/3 < r", Fraction(params.s, 3) < params.r, margin=params.r - params.s / 3)
    report.add_check("q > n", params.q > params.n, margin=params.q - params.n)
    report.warnings.append(INSECURE_NOTICE)
    return report


def advise_rank_ideal(inputs: Dict[str, Any]) -> AdviceReport:
    _require(inputs, "w")
    w = int(inputs["w"])
    report = AdviceReport(SchemeId.RANK_IDEAL.value, dict(inputs))
    report.derived.update({"stated_min_m": stated_min_m(w), "operational_min_m": operational_min_m(w),
                           "ciphertext_limit": 2 * w})
    if "m" in inputs:
        m = int(inputs["m"])
        stated_ok = Fraction(w * (w + 3), 2) + 1 < m
        report.add_check("w(w+3)/2 + 1 < m", stated_ok, margin=m - (w * (w + 3) / 2 + 1))
        report.add_check("w(w+5)/2 + 2 <= m", m >= operational_min_m(w), margin=m - operational_min_m(w))
    report.warnings.append(f"publishing {2 * w} or more ciphertexts under one key exposes the support of x")
    return report


def advise_rank_ideal_additive(inputs: Dict[str, Any]) -> AdviceReport:
    """Additive-only keys skip the product decoding, so only w < m binds."""
    _require(inputs, "w")
    w = int(inputs["w"])
    report = AdviceReport(SchemeId.RANK_IDEAL_ADDITIVE.value, dict(inputs))
    report.derived.update({"min_m": w + 1, "ciphertext_limit": 2 * w})
    if "m" in inputs:
        m = int(inputs["m"])
        report.add_check("w < m", w < m, margin=m - w)
    report.warnings.append(f"publishing {2 * w} or more ciphertexts under one key exposes the support of x")
    return report


def lattice_relation(n: int, q: int, sigma: float, lam: int, eps: float) -> Dict[str, Any]:
    """Log-space evaluation plus the 200-bit mpmath verdict of alpha q / sigma < 2^(2 sqrt(n log2 q log2 delta))."""
    result = security_check(n, q, sigma, lam, eps)
    with mpmath.workprec(RECHECK_PRECISION):
        log2_delta = mpmath.mpf(LINDNER_PEIKERT_NUMERATOR) / (lam + LINDNER_PEIKERT_OFFSET)
        alpha = mpmath.sqrt(mpmath.log(1 / mpmath.mpf(eps)) / mpmath.pi)
        rhs = mpmath.power(2, 2 * mpmath.sqrt(n * mpmath.log(q, 2) * log2_delta))
        exact = bool(alpha * q / mpmath.mpf(sigma) < rhs)
    result["exact_passed"] = exact
    return result


def advise_bfv(inputs: Dict[str, Any]) -> AdviceReport:
    _require(inputs, "n", "p")
    params = BFVParams.from_dict(inputs)
    lam = int(inputs.get("lambda", 128))
    eps = float(inputs.get("eps", 2.0 ** -64))
    report = AdviceReport(SchemeId.BFV.value, dict(inputs))
    relation = lattice_relation(params.n, params.q, params.sigma, lam, eps)
    report.derived.update({
        "q": params.q, "delta": params.delta, "relin_factor": params.relin_factor,
        "log2_delta": relation["log2_delta"], "alpha": relation["alpha"],
        "lhs_log2": relation["lhs_log2"], "rhs_log2": relation["rhs_log2"],
    })
    report.add_check("Delta >= 1", params.delta >= 1)
    report.add_check("security relation", relation["passed"], margin=relation["margin_bits"])
    _recheck(report, "security relation", relation["passed"], relation["exact_passed"])
    if not relation["passed"]:
        report.warnings.append(f"parameters miss the {lam}-bit relation by {-relation['margin_bits']:.1f} bits")
    return report


def advise_ckks(inputs: Dict[str, Any]) -> AdviceReport:
    params = CKKSParams.from_dict(inputs)
    report = AdviceReport(SchemeId.CKKS.value, dict(inputs))
    chain = [params.q_level(level) for level in range(params.L + 1)]
    report.derived.update({
        "chain_bits": [q.bit_length() for q in chain],
        "q_top_bits": chain[-1].bit_length(),
        "evk_modulus_bits": (params.P * chain[-1]).bit_length(),
        "max_mult_depth": params.L,
    })
    report.add_check("q_l strictly increasing", all(a < b for a, b in zip(chain, chain[1:])))
    report.add_check("P >= q_L", params.P >= chain[-1], margin=math.log2(params.P) - math.log2(chain[-1]))
    report.add_check("Delta^2 < q_L / 2", 2 * params.delta ** 2 < chain[-1],
                     margin=math.log2(chain[-1]) - 1 - 2 * math.log2(params.delta))
    if params.delta != params.p:
        report.warnings.append("Delta != p: rescaling after a product does not restore the scale Delta")
    return report


def advise_cg_vector(inputs: Dict[str, Any]) -> AdviceReport:
    _require(inputs, "p")
    p = int(inputs["p"])
    if "r" in inputs and "m" in inputs:
        r, m = int(inputs["r"]), int(inputs["m"])
    else:
        r, m = select_rm(p)
    k, n = rm_dimension(r, m), 2 ** m
    report = AdviceReport(SchemeId.CG_VECTOR.value, dict(inputs))
    report.derived.update({"r": r, "m": m, "k": k, "n": n, "min_ell": n * n})
    report.add_check("k >= 2p", k >= 2 * p, margin=k - 2 * p)
    report.add_check("n >= 2k", n >= 2 * k, margin=n - 2 * k)
    if "ell" in inputs:
        report.add_check("ell >= n^2", int(inputs["ell"]) >= n * n, margin=int(inputs["ell"]) - n * n)
    return report


def advise_cg_matrix(inputs: Dict[str, Any]) -> AdviceReport:
    _require(inputs, "r", "m", "bad_locations")
    r, m, bad = int(inputs["r"]), int(inputs["m"]), int(inputs["bad_locations"])
    d = 2 ** (m - r)
    report = AdviceReport(SchemeId.CG_MATRIX.value, dict(inputs))
    report.derived.update({"k": rm_dimension(r, m), "n": 2 ** m, "d": d})
    report.add_check("|S1| < d/2", Fraction(bad) < Fraction(d, 2), margin=d / 2 - bad)
    return report


def advise_intpoly(inputs: Dict[str, Any]) -> AdviceReport:
    params = IntPolyParams.from_dict(inputs)
    report = AdviceReport(SchemeId.INTPOLY.value, dict(inputs))
    fresh = 1 + 2 * (2 ** params.noise_bits - 1)
    half = 1 << (params.ell - 2)  # S_k has ell bits, so S_k / 2 >= 2^(ell-2)
    depth, bound = 0, fresh
    while (params.degree + 1) * bound * bound < half:
        bound = (params.degree + 1) * bound * bound
        depth += 1
    report.derived.update({"gamma": params.gamma, "d_bits": params.d_bits, "fresh_noise_bound": fresh,
                           "mult_depth": depth})
    product = (params.degree + 1) * fresh * fresh
    report.add_check("one product stays below S_k / 2", product < half,
                     margin=math.log2(half) - math.log2(product))
    return report


def advise_mvideal(inputs: Dict[str, Any]) -> AdviceReport:
    params = MVIdealParams.from_dict(inputs)
    alpha = params.generators * math.comb(params.l + params.r - 1, params.l)
    report = AdviceReport(SchemeId.MVIDEAL.value, dict(inputs))
    report.derived.update({"q": params.q, "N": params.N, "alpha_estimate": alpha,
                           "max_sigma_s": (params.q // 2 - 1) // (params.p * MVIDEAL_HEADROOM)})
    report.add_check("alpha < n <= N", alpha < params.n <= params.N)
    report.add_check("p * headroom < floor(q/2)", params.p * MVIDEAL_HEADROOM < params.q // 2)
    return report


_ADVISORS: Dict[SchemeId, Callable[[Dict[str, Any]], AdviceReport]] = {
    SchemeId.ARMKNECHT: advise_armknecht,
    SchemeId.CG_VECTOR: advise_cg_vector,
    SchemeId.CG_MATRIX: advise_cg_matrix,
    SchemeId.BOGDANOV_LEE: advise_bogdanov_lee,
    SchemeId.RANK_IDEAL: advise_rank_ideal,
    SchemeId.RANK_IDEAL_ADDITIVE: advise_rank_ideal_additive,
    SchemeId.INTPOLY: advise_intpoly,
    SchemeId.MVIDEAL: advise_mvideal,
    SchemeId.BFV: advise_bfv,
    SchemeId.CKKS: advise_ckks,
}


def advise(scheme: Union[SchemeId, str], inputs: Dict[str, Any]) -> AdviceReport:
    """Derive and check parameters for one scheme.

    Args:
        scheme: SchemeId or its string value.
        inputs: security inputs (e.g. ``{"s": 8, "mu": 2}`` for armknecht).

    Returns:
        AdviceReport; the function is pure.
    """
    scheme = SchemeId(scheme) if isinstance(scheme, str) else scheme
    report = _ADVISORS[scheme](dict(inputs))
    report.scheme = scheme.value
    failed = [c.name for c in report.checks if not c.passed]
    logger.info(f"advise {scheme.value}: {len(report.checks)} checks, {len(failed)} failed")
    return report
