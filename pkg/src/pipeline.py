"""Self-test pipeline: per-scheme property suites, noise and failure studies, reports."""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src import scheme_bfv, scheme_ckks, scheme_intpoly, scheme_mvideal
from src.algebra import FieldCtx, rank_weight
from src.codes import GF2, build_binary_rm, build_ideal_code, reed_decode
from src.config import (
    BL_STUDY_ETA,
    DESK_PROFILES,
    LINDNER_PEIKERT_NUMERATOR,
    LINDNER_PEIKERT_OFFSET,
    REPORTS_DIR,
    SEED_BYTES,
    SELFTEST_TRIALS,
)
from src.exceptions import BudgetExceeded, HEZooError
from src.he_core import (
    SCHEME_CATALOGUE,
    CiphertextEnvelope,
    KeyBundle,
    RngStream,
    SchemeId,
    eval_dispatch,
    get_adapter,
    seed_from_int,
)
from src.metrics import (
    error_summary,
    growth_law,
    noise_summary,
    overall_status,
    property_matrix,
    rate_table,
)
from src.params_advisor import advise
from src.scheme_armknecht import param_search
from src.scheme_bogdanovlee import BLParams, fresh_failure_count, product_success_counts
from src.scheme_bogdanovlee import keygen as bl_keygen
from src.scheme_rankideal import RankIdealParams
from src.stats_tests import binomial_sigma_check, expected_failure_rate, trend_test, two_proportion_z_test
from src.viz import plot_ckks_errors, plot_failure_rates, plot_noise_growth

logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)

# products that are reported as agreement rates instead of pass/fail
MEASURED_MULT = {SchemeId.CG_VECTOR, SchemeId.BOGDANOV_LEE}
NOISE_STUDY_SCHEMES = (SchemeId.BFV, SchemeId.CKKS, SchemeId.INTPOLY, SchemeId.MVIDEAL)
CKKS_TREND_SIGMAS = (3.2, 16.0, 64.0, 256.0, 1024.0)
CKKS_TREND_DELTA_LOG2 = (16, 19, 22, 25)
SUBSTRATE = "substrate"


def trials_for(name: str, quick: bool) -> int:
    full, short = SELFTEST_TRIALS[name]
    return short if quick else full


def _row(scheme, prop: str, status: str, trials: int = 0, value: Any = None, detail: str = "") -> Dict:
    return {
        "scheme": scheme.value if isinstance(scheme, SchemeId) else scheme,
        "property": prop,
        "status": status,
        "trials": int(trials),
        "value": None if value is None else float(value),
        "detail": detail,
    }


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


class Keyring:
    """Key bundle for a test run, replaced before an encryption ledger runs out."""

    def __init__(self, scheme: SchemeId, params: Dict[str, Any], rng: RngStream):
        self.scheme = scheme
        self.params = params
        self.rng = rng
        self.adapter = get_adapter(scheme)
        self.rekeys = 0
        self._new_key()

    def _new_key(self) -> None:
        self.bundle: KeyBundle = self.adapter.keygen(self.params, self.rng.read(SEED_BYTES))
        self.keys = self.adapter.load(self.bundle)

    def reserve(self, count: int) -> None:
        """Rekey when ``count`` more encryptions would exceed the key's limit."""
        ledger = self.adapter.ledger(self.keys)
        if ledger is not None and ledger.limit is not None and ledger.count + count > ledger.limit:
            self._new_key()
            self.rekeys += 1

    def message(self):
        return self.adapter.random_message(self.rng, self.keys)

    def encrypt(self, message) -> CiphertextEnvelope:
        return self.adapter.encrypt_envelope(message, self.keys, self.rng)

    def decrypt(self, envelope: CiphertextEnvelope):
        return self.adapter.decrypt_envelope(envelope, self.keys)

    def eval(self, op: str, cts: Sequence[CiphertextEnvelope], operand: Any = None) -> CiphertextEnvelope:
        return eval_dispatch(op, cts, self.bundle, operand)

    def expected(self, op: str, messages: Sequence[Any]):
        return self.adapter.expected(op, messages, self.keys)

    def matches(self, got, want) -> bool:
        return self.adapter.messages_match(got, want, self.keys)


# ---------------------------------------------------------------------------
# Per-scheme suites
# ---------------------------------------------------------------------------


def suite_roundtrip(ring: Keyring, trials: int) -> List[Dict]:
    """Dec(Enc(m)) = m through envelope bytes, plus key and ciphertext determinism."""
    scheme = ring.scheme
    correct = 0
    serialized = True
    for _ in range(trials):
        ring.reserve(1)
        message = ring.message()
        envelope = ring.encrypt(message)
        restored = CiphertextEnvelope.from_bytes(envelope.to_bytes())
        serialized &= restored == envelope
        correct += int(ring.matches(ring.decrypt(restored), message))

    seed = seed_from_int(trials)
    first = ring.adapter.keygen(ring.params, seed)
    second = ring.adapter.keygen(ring.params, seed)
    keys_identical = first.to_bytes() == second.to_bytes()
    serialized &= KeyBundle.from_bytes(first.to_bytes()) == first
    keys = ring.adapter.load(first)
    message = ring.adapter.random_message(RngStream(seed), keys)
    cts = [ring.adapter.encrypt_envelope(message, keys, RngStream(seed).fork("encrypt")) for _ in range(2)]

    return [
        _row(scheme, "roundtrip", _verdict(correct == trials), trials, correct / max(trials, 1),
             f"{correct}/{trials} correct"),
        _row(scheme, "serialization", _verdict(serialized), trials + 1),
        _row(scheme, "determinism", _verdict(keys_identical and cts[0].to_bytes() == cts[1].to_bytes()), 2),
    ]


def suite_homomorphism(ring: Keyring, op: str, trials: int) -> Dict:
    """Dec(op(Enc m1, Enc m2)) against the plaintext model; approximate products are rescaled once."""
    scheme = ring.scheme
    agree = 0
    for _ in range(trials):
        ring.reserve(2)
        m1, m2 = ring.message(), ring.message()
        try:
            result = ring.eval(op, [ring.encrypt(m1), ring.encrypt(m2)])
            if scheme == SchemeId.CKKS and op == "mult":
                result = ring.eval("rescale", [result])
            agree += int(ring.matches(ring.decrypt(result), ring.expected(op, [m1, m2])))
        except HEZooError as exc:
            logger.debug(f"{scheme.value} {op}: {exc.code}")
    rate = agree / max(trials, 1)
    if op == "mult" and scheme in MEASURED_MULT:
        logger.warning(f"{scheme.value} product agreement measured at {rate:.3f}")
        return _row(scheme, op, "measured", trials, rate, f"{agree}/{trials} agree")
    return _row(scheme, op, _verdict(agree == trials), trials, rate, f"{agree}/{trials} agree")


def suite_ptmult(ring: Keyring, trials: int) -> Dict:
    agree = 0
    for _ in range(trials):
        ring.reserve(1)
        message, plain = ring.message(), ring.message()
        result = ring.eval("ptmult", [ring.encrypt(message)], operand=ring.adapter.format_message(plain))
        agree += int(ring.matches(ring.decrypt(result), ring.expected("ptmult", [message, plain])))
    return _row(ring.scheme, "ptmult", _verdict(agree == trials), trials, agree / max(trials, 1))


def suite_exhaustive_cg(ring: Keyring, ops: Sequence[str]) -> List[Dict]:
    """Every message pair for the small Challagunta codes."""
    width = len(ring.message())
    messages = [[(value >> i) & 1 for i in reversed(range(width))] for value in range(2 ** width)]
    encrypted = [ring.encrypt(m) for m in messages]
    rows = []
    for op in ops:
        agree = total = 0
        for i, a in enumerate(messages):
            for j, b in enumerate(messages):
                total += 1
                try:
                    got = ring.decrypt(ring.eval(op, [encrypted[i], encrypted[j]]))
                except HEZooError:
                    continue
                agree += int(ring.matches(got, ring.expected(op, [a, b])))
        rows.append(_row(ring.scheme, f"exhaustive-{op}", _verdict(agree == total), total, agree / total))
    return rows


def _random_circuit(rng: RngStream, budget: int, depth: int):
    if depth == 0 or rng.random() < 0.3:
        return ("leaf",)
    left = _random_circuit(rng, budget, depth - 1)
    right = _random_circuit(rng, budget, depth - 1)
    if _circuit_gamma(left) + _circuit_gamma(right) <= budget and rng.bernoulli(0.5):
        return ("mult", left, right)
    return ("add", left, right)


def _circuit_gamma(node) -> int:
    if node[0] == "leaf":
        return 1
    left, right = _circuit_gamma(node[1]), _circuit_gamma(node[2])
    return left + right if node[0] == "mult" else max(left, right)


def _circuit_leaves(node) -> int:
    return 1 if node[0] == "leaf" else _circuit_leaves(node[1]) + _circuit_leaves(node[2])


def _evaluate_circuit(node, ring: Keyring):
    """(ciphertext, plaintext) of a circuit with freshly encrypted leaves."""
    if node[0] == "leaf":
        message = ring.message()
        return ring.encrypt(message), message
    (c1, m1), (c2, m2) = _evaluate_circuit(node[1], ring), _evaluate_circuit(node[2], ring)
    return ring.eval(node[0], [c1, c2]), ring.expected(node[0], [m1, m2])


def suite_budget_law(ring: Keyring, trials: int) -> List[Dict]:
    """Random circuits with gamma <= mu decrypt correctly; gamma sums above mu are refused."""
    mu = ring.adapter.mult_budget(ring.keys)
    correct = 0
    for _ in range(trials):
        circuit = _random_circuit(ring.rng, mu, depth=3)
        ring.reserve(_circuit_leaves(circuit))
        ct, want = _evaluate_circuit(circuit, ring)
        correct += int(ring.matches(ring.decrypt(ct), want))

    refused = 0
    for _ in range(trials):
        ring.reserve(mu + 1)
        acc = ring.encrypt(ring.message())
        for _ in range(mu - 1):
            acc = ring.eval("mult", [acc, ring.encrypt(ring.message())])
        try:
            ring.eval("mult", [acc, ring.encrypt(ring.message())])
        except BudgetExceeded:
            refused += 1
    return [
        _row(ring.scheme, "budget-law", _verdict(correct == trials), trials, correct / trials,
             f"{ring.rekeys} rekeys"),
        _row(ring.scheme, "budget-refusal", _verdict(refused == trials), trials, refused / trials),
    ]


def suite_mvideal_mult(ring: Keyring, trials: int) -> Dict:
    """Products decrypt whenever the product residue stays below half the decryption scale."""
    key, rng = ring.keys, ring.rng
    checked = correct = 0
    for _ in range(trials):
        m1, m2 = rng.randbelow(2), rng.randbelow(2)
        c1, c2 = scheme_mvideal.encrypt(m1, key, rng), scheme_mvideal.encrypt(m2, key, rng)
        residue = scheme_mvideal.mult_residue(scheme_mvideal.noise_vector(c1, m1, key),
                                              scheme_mvideal.noise_vector(c2, m2, key), m1, m2, key)
        if abs(residue) < key.scale // 2:
            checked += 1
            correct += int(scheme_mvideal.decrypt(scheme_mvideal.eval_mult(c1, c2, key), key) == m1 * m2)
    return _row(SchemeId.MVIDEAL, "mult", _verdict(checked > 0 and correct == checked), checked,
                correct / max(checked, 1), f"{checked}/{trials} trials met the noise condition")


def suite_refresh(ring: Keyring, trials: int) -> Dict:
    """Dec(Refresh(c)) = Dec(c) on sums and products of fresh ciphertexts."""
    key, rng = ring.keys, ring.rng
    same = 0
    for i in range(trials):
        c1 = scheme_intpoly.encrypt(ring.message(), key, rng)
        c2 = scheme_intpoly.encrypt(ring.message(), key, rng)
        ct = scheme_intpoly.eval_mult(c1, c2) if i % 2 else scheme_intpoly.eval_add(c1, c2)
        same += int(scheme_intpoly.decrypt(scheme_intpoly.refresh(ct, key), key) == scheme_intpoly.decrypt(ct, key))
    return _row(SchemeId.INTPOLY, "refresh-invariance", _verdict(same == trials), trials, same / trials)


def suite_bfv_boundary(ring: Keyring, trials: int) -> List[Dict]:
    """Planted noise below Delta/2 - p decrypts; beyond Delta/2 + p it flips a coefficient."""
    keys, rng = ring.keys, ring.rng
    params = keys.params
    delta, p, n = params.delta, params.p, params.n
    below = above = 0
    for _ in range(trials):
        m = rng.uniform_ints(p, n)
        small = [rng.randint(-(delta // 2 - p), delta // 2 - p) for _ in range(n)]
        below += int(scheme_bfv.decrypt(scheme_bfv.planted_ciphertext(m, small, params), keys) == m)
        large = [0] * n
        sign = 1 if rng.bernoulli(0.5) else -1
        large[rng.randbelow(n)] = sign * (delta // 2 + p + rng.randbelow(delta // 4))
        above += int(scheme_bfv.decrypt(scheme_bfv.planted_ciphertext(m, large, params), keys) != m)
    return [
        _row(SchemeId.BFV, "noise-below-bound", _verdict(below == trials), trials, below / trials),
        _row(SchemeId.BFV, "noise-above-bound", _verdict(above == trials), trials, above / trials),
    ]


def suite_bogdanov_lee(params: Dict[str, Any], rng: RngStream, trials: int, mult_trials: int):
    """Fresh failure rate against 1 - (1 - eta)^s, plus measured product rates per degree cap."""
    study_params = BLParams.from_dict(dict(params, eta=BL_STUDY_ETA))
    keys = bl_keygen(study_params, rng)
    failures = fresh_failure_count(keys, rng, trials, BL_STUDY_ETA)
    expected = expected_failure_rate(BL_STUDY_ETA, study_params.s)
    check = binomial_sigma_check(failures, trials, expected)

    noiseless = bl_keygen(BLParams.from_dict(dict(params, eta=0.0)), rng)
    successes = product_success_counts(noiseless, rng, mult_trials)
    comparison = two_proportion_z_test(mult_trials, successes[1], mult_trials, successes[2])

    counts = pd.DataFrame([
        {"label": f"fresh failures (eta={BL_STUDY_ETA})", "events": failures, "trials": trials},
        {"label": "product success, degree cap 1", "events": successes[1], "trials": mult_trials},
        {"label": "product success, degree cap 2", "events": successes[2], "trials": mult_trials},
    ])
    rows = [
        _row(SchemeId.BOGDANOV_LEE, "failure-rate", _verdict(check["within"]), trials, check["observed_rate"],
             f"expected {expected:.4f}, z={check['z']:+.2f}"),
        _row(SchemeId.BOGDANOV_LEE, "mult-cap1", "measured", mult_trials, successes[1] / mult_trials),
        _row(SchemeId.BOGDANOV_LEE, "mult-cap2", "measured", mult_trials, successes[2] / mult_trials,
             f"cap 1 vs 2 p={comparison['p_value']:.3g}"),
    ]
    return rows, rate_table(counts), expected


# ---------------------------------------------------------------------------
# Substrate suites
# ---------------------------------------------------------------------------


def suite_reed_decoder(rng: RngStream, samples: int) -> List[Dict]:
    """Reed decoding corrects every error of weight below d/2 and never decodes silently wrong."""
    rows = []
    for r, m, exhaustive in ((1, 3, True), (1, 4, False), (2, 4, False)):
        rm = build_binary_rm(r, m)
        radius = (rm.d - 1) // 2
        cases = []
        if exhaustive:
            for value in range(2 ** rm.k):
                message = [(value >> i) & 1 for i in range(rm.k)]
                cases.append((message, []))
                cases.extend((message, [j]) for j in range(rm.n) if radius >= 1)
        else:
            for _ in range(samples):
                weight = rng.randbelow(radius + 1)
                cases.append((rng.bits(rm.k), rng.sample(rm.n, weight)))
        correct = wrong = 0
        for message, positions in cases:
            word = np.asarray(GF2(message) @ rm.G).astype(np.int64)
            word[np.asarray(positions, dtype=np.int64)] ^= 1
            try:
                decoded = [int(b) for b in np.asarray(reed_decode(word, rm))]
            except HEZooError:
                continue
            if decoded == list(message):
                correct += 1
            else:
                wrong += 1
        label = f"reed-rm({r},{m})" + ("-exhaustive" if exhaustive else "")
        rows.append(_row(SUBSTRATE, label, _verdict(correct == len(cases) and wrong == 0), len(cases),
                         correct / len(cases), f"{wrong} silent wrong decodes"))
    return rows


def span_dimension_oracle(v, ctx: FieldCtx) -> int:
    """Dimension of the F_q-span of v's entries by enumerating every F_q combination."""
    n = len(v)
    combos = np.array(np.unravel_index(np.arange(ctx.q ** n), (ctx.q,) * n)).T
    values = ctx.gf(combos) @ v
    size = len(set(int(x) for x in np.asarray(values)))
    return int(round(np.log(size) / np.log(ctx.q)))


def suite_rank_substrate(rng: RngStream, trials: int) -> List[Dict]:
    rows = []
    for q, m, n in ((2, 4, 5), (3, 3, 4)):
        ctx = FieldCtx(q, m)
        agree = sum(
            int(rank_weight(v, ctx) == span_dimension_oracle(v, ctx))
            for v in (rng.field_elements(ctx.gf, n) for _ in range(trials))
        )
        rows.append(_row(SUBSTRATE, f"rank-weight-F{q}^{m}", _verdict(agree == trials), trials, agree / trials))

    params = RankIdealParams.from_dict(DESK_PROFILES["rank-ideal"])
    ctx, ring_ctx = params.field_ctx(), params.ring_ctx()
    annihilated = 0
    checks = max(1, trials // 10)
    for _ in range(checks):
        code = build_ideal_code([rng.field_elements(ctx.gf, ring_ctx.n)], ring_ctx)
        annihilated += int(not np.any(code.H @ code.G.T != 0))
    rows.append(_row(SUBSTRATE, "ideal-code-parity", _verdict(annihilated == checks), checks))
    return rows


def suite_advisor(quick: bool) -> List[Dict]:
    lambdas = (80, 128, 192, 256)
    exact = all(
        abs(advise("bfv", {"n": 16, "q_bits": 30, "p": 256, "lambda": lam}).derived["log2_delta"]
            - LINDNER_PEIKERT_NUMERATOR / (lam + LINDNER_PEIKERT_OFFSET)) < 1e-9
        for lam in lambdas
    )
    grid = [(8, 1), (8, 2)] if quick else [(8, 1), (8, 2), (16, 1), (16, 2)]
    same = 0
    for s, mu in grid:
        report = advise("armknecht", {"s": s, "mu": mu})
        derived = (report.derived["n_min"], report.derived["rho_min"], report.derived["q_min"])
        same += int(derived == tuple(param_search(s, mu)) and report.passed)
    return [
        _row(SUBSTRATE, "advisor-log2-delta", _verdict(exact), len(lambdas)),
        _row(SUBSTRATE, "advisor-armknecht", _verdict(same == len(grid)), len(grid)),
    ]


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


def _noise_series(scheme: SchemeId, fresh: Callable, add: Callable, mult: Callable, report: Callable,
                  add_steps: int, depth: int, samples: int) -> List[Dict]:
    rows = []

    def record(op, step, ct):
        r = report(ct)
        rows.append({"scheme": scheme.value, "op": op, "step": step, "observed": r.observed,
                     "bound": r.bound, "budget_bits": r.budget_bits, "correct": r.correct})

    for _ in range(samples):
        acc = fresh()
        for k in range(1, add_steps + 1):
            acc = add(acc, fresh())
            record("add", k, acc)
        acc = fresh()
        for d in range(1, depth + 1):
            acc = mult(acc)
            record("mult", d, acc)
    return rows


def study_noise_growth(rng: RngStream, quick: bool, profiles: Dict[str, Dict] = DESK_PROFILES) -> pd.DataFrame:
    """Observed noise after k additions and after each multiplication depth."""
    samples, add_steps = (3, 4) if quick else (10, 8)
    rows = []

    bfv_keys = scheme_bfv.keygen(scheme_bfv.BFVParams.from_dict(profiles["bfv"]), rng.fork("bfv"))
    bp = bfv_keys.params

    def bfv_fresh():
        return scheme_bfv.encrypt(rng.uniform_ints(bp.p, bp.n), bfv_keys, rng)

    rows += _noise_series(SchemeId.BFV, bfv_fresh, scheme_bfv.eval_add,
                          lambda acc: scheme_bfv.eval_mult(acc, bfv_fresh(), bfv_keys),
                          lambda ct: scheme_bfv.decrypt_with_report(ct, bfv_keys)[1], add_steps, 2, samples)

    ckks_keys = scheme_ckks.keygen(scheme_ckks.CKKSParams.from_dict(profiles["ckks"]), rng.fork("ckks"))
    cp = ckks_keys.params

    def ckks_fresh(level=None):
        slots = [complex(2 * rng.random() - 1, 2 * rng.random() - 1) / 2 for _ in range(cp.slots)]
        return scheme_ckks.encrypt_vector(slots, ckks_keys, rng, level=level)

    def ckks_mult(acc):
        product = scheme_ckks.eval_mult(acc, ckks_fresh(acc.level), ckks_keys)
        return scheme_ckks.rescale(product, acc.level - 1, cp)

    rows += _noise_series(SchemeId.CKKS, ckks_fresh, scheme_ckks.eval_add, ckks_mult,
                          lambda ct: scheme_ckks.decrypt_with_report(ct, ckks_keys)[1], add_steps, cp.L, samples)

    int_key = scheme_intpoly.keygen(scheme_intpoly.IntPolyParams.from_dict(profiles["intpoly"]), rng.fork("intpoly"))

    def int_fresh():
        return scheme_intpoly.encrypt(rng.bits(int_key.params.degree + 1), int_key, rng)

    rows += _noise_series(SchemeId.INTPOLY, int_fresh, scheme_intpoly.eval_add,
                          lambda acc: scheme_intpoly.eval_mult(acc, int_fresh()),
                          lambda ct: scheme_intpoly.decrypt_with_report(ct, int_key)[1], add_steps, 2, samples)

    mv_key = scheme_mvideal.keygen(scheme_mvideal.MVIdealParams.from_dict(profiles["mvideal"]), rng.fork("mvideal"))

    def mv_fresh():
        return scheme_mvideal.encrypt(rng.randbelow(2), mv_key, rng)

    rows += _noise_series(SchemeId.MVIDEAL, mv_fresh, scheme_mvideal.eval_add,
                          lambda acc: scheme_mvideal.eval_mult(acc, mv_fresh(), mv_key),
                          lambda ct: scheme_mvideal.decrypt_with_report(ct, mv_key)[1], add_steps, 2, samples)
    return pd.DataFrame(rows)


def _ckks_pipeline_errors(params: Dict[str, Any], rng: RngStream, trials: int) -> List[float]:
    """Max-norm error of encode, encrypt, mult, rescale, decrypt, decode."""
    keys = scheme_ckks.keygen(scheme_ckks.CKKSParams.from_dict(params), rng)
    cp = keys.params
    errors = []
    for _ in range(trials):
        z1 = [complex(2 * rng.random() - 1, 2 * rng.random() - 1) / 2 for _ in range(cp.slots)]
        z2 = [complex(2 * rng.random() - 1, 2 * rng.random() - 1) / 2 for _ in range(cp.slots)]
        product = scheme_ckks.eval_mult(scheme_ckks.encrypt_vector(z1, keys, rng),
                                        scheme_ckks.encrypt_vector(z2, keys, rng), keys)
        lowered = scheme_ckks.rescale(product, cp.L - 1, cp)
        want = [a * b for a, b in zip(z1, z2)]
        errors.append(scheme_ckks.max_error(scheme_ckks.decrypt_vector(lowered, keys), want))
    return errors


def study_ckks_trend(rng: RngStream, quick: bool, base: Optional[Dict[str, Any]] = None):
    """Pipeline error for growing sigma and growing scale, with rank-correlation trend checks."""
    base = dict(base or DESK_PROFILES["ckks"])
    trials = 3 if quick else 20
    rows = []
    for sigma in CKKS_TREND_SIGMAS:
        for error in _ckks_pipeline_errors(dict(base, sigma=sigma), rng.fork(f"sigma={sigma}"), trials):
            rows.append({"factor": "sigma", "value": sigma, "error": error})
    for d in CKKS_TREND_DELTA_LOG2:
        params = dict(base, delta_log2=d, p_log2=d, P_log2=base["q0_log2"] + base["L"] * d)
        for error in _ckks_pipeline_errors(params, rng.fork(f"delta={d}"), trials):
            rows.append({"factor": "delta_log2", "value": float(d), "error": error})
    errors = pd.DataFrame(rows)

    by_sigma = errors[errors["factor"] == "sigma"]
    by_scale = errors[errors["factor"] == "delta_log2"]
    sigma_trend = trend_test(by_sigma["value"].tolist(), by_sigma["error"].tolist())
    scale_trend = trend_test(by_scale["value"].tolist(), by_scale["error"].tolist())
    summary = error_summary(by_sigma["error"])
    results = [
        _row(SchemeId.CKKS, "trend-sigma", _verdict(sigma_trend["direction"] == "increasing"), len(by_sigma),
             sigma_trend["rho"], f"p={sigma_trend['p_value']:.3g}, max error {summary['max']:.3g}"),
        _row(SchemeId.CKKS, "trend-scale", _verdict(scale_trend["direction"] == "decreasing"), len(by_scale),
             scale_trend["rho"], f"p={scale_trend['p_value']:.3g}"),
    ]
    return results, errors


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def run_property_suites(schemes: Sequence[SchemeId], rng: RngStream, quick: bool,
                        profiles: Dict[str, Dict] = DESK_PROFILES) -> Dict[str, Any]:
    rows: List[Dict] = []
    failure_rates = None
    expected_rate = None
    for scheme in schemes:
        logger.info(f"Running {scheme.value} suites")
        params = profiles[scheme.value]
        ring = Keyring(scheme, params, rng.fork(scheme.value))
        rows += suite_roundtrip(ring, trials_for("roundtrip", quick))
        rows.append(suite_homomorphism(ring, "add", trials_for("add", quick)))
        if "mult" in ring.adapter.supported_ops:
            if scheme == SchemeId.MVIDEAL:
                rows.append(suite_mvideal_mult(ring, trials_for("mult", quick)))
            else:
                rows.append(suite_homomorphism(ring, "mult", trials_for("mult", quick)))
        if "ptmult" in ring.adapter.supported_ops:
            rows.append(suite_ptmult(ring, trials_for("add", quick)))

        if scheme == SchemeId.CG_MATRIX:
            rows += suite_exhaustive_cg(ring, ("add", "mult"))
        elif scheme == SchemeId.CG_VECTOR:
            rows += suite_exhaustive_cg(ring, ("add",))
        elif scheme == SchemeId.ARMKNECHT:
            rows += suite_budget_law(ring, trials_for("circuits", quick))
        elif scheme == SchemeId.INTPOLY:
            rows.append(suite_refresh(ring, trials_for("refresh", quick)))
        elif scheme == SchemeId.BFV:
            rows += suite_bfv_boundary(ring, trials_for("roundtrip", quick))
        elif scheme == SchemeId.BOGDANOV_LEE:
            bl_rows, failure_rates, expected_rate = suite_bogdanov_lee(
                params, rng.fork("bl-study"), trials_for("failure_rate", quick), trials_for("mult", quick))
            rows += bl_rows
    return {"rows": rows, "failure_rates": failure_rates, "expected_failure_rate": expected_rate}


def generate_summary(results: pd.DataFrame, matrix: pd.DataFrame, status: Dict,
                     law: Optional[pd.DataFrame] = None) -> str:
    """Self-test summary markdown."""
    summary = f"""# he-zoo Self-Test Summary

## Overall

- **Checks**: {status['total']}
- **Passed**: {status['passed']}
- **Failed**: {status['failed']}
- **Measured (not asserted)**: {status['measured']}
- **Verdict**: {'PASS' if status['all_passed'] else 'FAIL'}

## Scheme Catalogue

| scheme | family | key type | homomorphism |
|---|---|---|---|
"""
    for scheme, (family, key_type, kind) in SCHEME_CATALOGUE.items():
        summary += f"| {scheme.value} | {family} | {key_type} | {kind} |\n"

    summary += "\n## Property Matrix\n\n"
    if not matrix.empty:
        columns = list(matrix.columns)
        summary += "| scheme | " + " | ".join(columns) + " |\n"
        summary += "|---|" + "---|" * len(columns) + "\n"
        for scheme, row in matrix.iterrows():
            summary += f"| {scheme} | " + " | ".join(str(row[c]) for c in columns) + " |\n"

    measured = results[results["status"] == "measured"]
    if not measured.empty:
        summary += "\n## Measured Quantities\n\n"
        for row in measured.itertuples():
            summary += f"- **{row.scheme} / {row.property}**: {row.value:.4f} ({row.detail or f'{row.trials} trials'})\n"

    if law is not None and not law.empty:
        summary += "\n## Noise Growth (log2 bits per step)\n\n"
        for row in law.itertuples():
            summary += f"- **{row.scheme} / {row.op}**: {row.log2_slope:+.3f}\n"

    if status["failures"]:
        summary += "\n## Failures\n\n"
        for scheme, prop in status["failures"]:
            detail = results[(results["scheme"] == scheme) & (results["property"] == prop)]["detail"].iloc[0]
            summary += f"- {scheme} / {prop}: {detail}\n"

    summary += "\n---\n*Report generated by the he-zoo self-test pipeline*\n"
    return summary


def run_selftest(schemes: Optional[Sequence[SchemeId]] = None, quick: bool = False, seed: int = 0,
                 out_dir: Path = REPORTS_DIR, studies: bool = True, figures: bool = True) -> Dict[str, Any]:
    """Run the self-test suites and write the report files.

    Args:
        schemes: Schemes to test (all when None; substrate checks only run for all)
        quick: Use the reduced trial counts
        seed: Seed of the run's RngStream
        out_dir: Report directory
        studies: Run the noise-growth and approximate-error studies
        figures: Draw figures for the studies

    Returns:
        Dictionary with the results frame, matrix, status and study frames
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    everything = schemes is None
    schemes = list(SchemeId) if everything else list(schemes)
    rng = RngStream.from_int(seed)

    logger.info("=" * 60)
    logger.info(f"Starting he-zoo self-test ({'quick' if quick else 'full'}, seed={seed})")
    logger.info("=" * 60)

    logger.info("\n[Step 1/5] Property Suites")
    suites = run_property_suites(schemes, rng, quick)
    rows = suites["rows"]
    if everything:
        rows += suite_reed_decoder(rng.fork("reed"), trials_for("reed_sampled", quick))
        rows += suite_rank_substrate(rng.fork("rank"), trials_for("refresh", quick))
        rows += suite_advisor(quick)

    logger.info("\n[Step 2/5] Studies")
    noise = law = ckks_errors = None
    if studies and any(s in NOISE_STUDY_SCHEMES for s in schemes):
        noise = noise_summary(study_noise_growth(rng.fork("noise"), quick))
        noise = noise[noise["scheme"].isin([s.value for s in schemes])]
        law = growth_law(noise)
    if studies and SchemeId.CKKS in schemes:
        trend_rows, ckks_errors = study_ckks_trend(rng.fork("ckks-trend"), quick)
        rows += trend_rows

    logger.info("\n[Step 3/5] Saving Tables")
    results = pd.DataFrame(rows, columns=["scheme", "property", "status", "trials", "value", "detail"])
    matrix = property_matrix(results)
    status = overall_status(results)
    results.to_csv(out_dir / "selftest_results.csv", index=False)
    results.to_parquet(out_dir / "selftest_results.parquet", index=False)
    matrix.to_csv(out_dir / "property_matrix.csv")
    if noise is not None:
        noise.to_csv(out_dir / "noise_growth.csv", index=False)
    if suites["failure_rates"] is not None:
        suites["failure_rates"].to_csv(out_dir / "failure_rates.csv", index=False)
    if ckks_errors is not None:
        ckks_errors.to_csv(out_dir / "ckks_errors.csv", index=False)
    logger.info(f"Saved tables to {out_dir}")

    logger.info("\n[Step 4/5] Generating Visualizations")
    if figures:
        figures_dir = out_dir / "figures"
        if noise is not None and not noise.empty:
            plot_noise_growth(noise, figures_dir=figures_dir)
        if suites["failure_rates"] is not None:
            plot_failure_rates(suites["failure_rates"].iloc[:1], expected=suites["expected_failure_rate"],
                               figures_dir=figures_dir)
        if ckks_errors is not None:
            plot_ckks_errors(ckks_errors, figures_dir=figures_dir)

    logger.info("\n[Step 5/5] Writing Summary")
    summary_path = out_dir / "selftest_summary.md"
    with open(summary_path, "w") as f:
        f.write(generate_summary(results, matrix, status, law))
    logger.info(f"Saved summary: {summary_path}")

    logger.info("\n" + "=" * 60)
    logger.info(f"Self-test complete: {status['passed']} passed, {status['failed']} failed, "
                f"{status['measured']} measured")
    logger.info("=" * 60)

    return {
        "results": results,
        "matrix": matrix,
        "status": status,
        "noise": noise,
        "growth_law": law,
        "failure_rates": suites["failure_rates"],
        "ckks_errors": ckks_errors,
        "summary_path": summary_path,
    }


if __name__ == "__main__":
    outcome = run_selftest(quick=True)
