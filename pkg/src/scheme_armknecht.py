"""Symmetric somewhat-homomorphic scheme on punctured q-ary Reed-Muller evaluation codes.

Ciphertexts are codewords of C = RM_q(3, 2 rho) whose function takes the
message value at a secret point y, plus errors confined to locations outside
a secret good set I. Products of up to mu ciphertexts stay inside
C~ = RM_q(3, 2 mu rho), so decryption interpolates there.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, NamedTuple, Optional, Sequence, Tuple

import galois
import numpy as np

from src.algebra import as_ints, null_space, solve_linear
from src.codes import QaryRM, build_qary_rm, interpolate_eval, qary_function_dim, special_zero_codeword, support
from src.config import ADVISOR_Q_CAP, ADVISOR_RHO_SLACK, MAX_KEYGEN_RETRIES
from src.exceptions import (
    BudgetExceeded,
    GammaExceeded,
    MessageError,
    NoParamsFound,
    ParameterError,
    RetriesExhausted,
)
from src.he_core import (
    CiphertextEnvelope,
    EncryptionLedger,
    RngStream,
    SchemeAdapter,
    SchemeId,
    int_width,
    pack_ints,
    unpack_ints,
)

logger = logging.getLogger(__name__)

T_VARIABLES = 3


# ---------------------------------------------------------------------------
# Parameter formulas
# ---------------------------------------------------------------------------


def length_bound(s: int, mu: int, rho: int) -> float:
    """2^(s / C(3 + rho, rho)) * C(3 + 2 mu rho, 3)."""
    return 2.0 ** (s / math.comb(3 + rho, rho)) * math.comb(3 + 2 * mu * rho, 3)


def length_upper_bound(s: int, mu: int) -> float:
    """2^(6s / (cbrt(6s))^3) * (3 + 2 mu cbrt(6s))^3."""
    root = (6 * s) ** (1.0 / 3.0)
    return 2.0 ** (6 * s / root ** 3) * (3 + 2 * mu * root) ** 3


def rho_search_range(s: int) -> range:
    return range(1, math.ceil((6 * s) ** (1.0 / 3.0)) + ADVISOR_RHO_SLACK + 1)


def _log2_binomial(n: int, k: int) -> float:
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / math.log(2)


def q_condition_log(q: int, s: int, mu: int, rho: int) -> float:
    """log2 of the q_min left-hand side; the condition holds when this is <= -s."""
    numerator = math.comb(3 + 2 * mu * rho, 3)
    total = 0.0
    for j in range(rho + 2):
        if numerator - j <= 0:
            return -math.inf
        total += math.log2(numerator - j) - math.log2(q ** 3 - j)
    total += 2 * math.log2(q) + math.log2(q * q + q + 1) + _log2_binomial(q, rho + 2)
    return total


def q_condition_exact(q: int, s: int, mu: int, rho: int) -> bool:
    """The q_min inequality in exact rational arithmetic."""
    numerator = math.comb(3 + 2 * mu * rho, 3)
    product = Fraction(1)
    for j in range(rho + 2):
        product *= Fraction(max(numerator - j, 0), q ** 3 - j)
    lhs = product * q * q * (q * q + q + 1) * math.comb(q, rho + 2)
    return lhs <= Fraction(1, 2 ** s)


class ParamSearchResult(NamedTuple):
    n_min: float
    rho_min: int
    q_min: int


def find_q_min(s: int, mu: int, rho: int, cap: int = ADVISOR_Q_CAP) -> int:
    """Smallest prime power q (rho + 2 <= q <= cap) satisfying the log-space condition."""
    for q in range(max(rho + 2, 2), cap + 1):
        if q_condition_log(q, s, mu, rho) <= -s and galois.is_prime_power(q):
            return q
    raise NoParamsFound(f"no prime power q <= {cap} satisfies the condition for s={s}, mu={mu}, rho={rho}")


def param_search(s: int, mu: int) -> ParamSearchResult:
    """(n_min, rho_min, q_min) minimizing the code length over rho."""
    if s < 1 or mu < 1:
        raise ParameterError(f"need s >= 1 and mu >= 1, got s={s}, mu={mu}")
    candidates = [(length_bound(s, mu, rho), rho) for rho in rho_search_range(s)]
    n_min, rho_min = min(candidates)
    q_min = find_q_min(s, mu, rho_min)
    logger.info(f"param_search(s={s}, mu={mu}): n_min={n_min:.2f}, rho_min={rho_min}, q_min={q_min}")
    return ParamSearchResult(n_min=n_min, rho_min=rho_min, q_min=q_min)


# ---------------------------------------------------------------------------
# Keys and ciphertexts
# ---------------------------------------------------------------------------


def good_location_count(n: int, L: int, q: int) -> int:
    """T = min(n - L - 1, ceil(q/2) - 1)."""
    return min(n - L - 1, math.ceil(q / 2) - 1)


@dataclass(frozen=True)
class ArmknechtParams:
    s: int
    mu: int
    L: int
    q: int
    rho: int
    n: int
    T: Optional[int] = None
    t: int = T_VARIABLES

    def __post_init__(self):
        if self.t != T_VARIABLES:
            raise ParameterError(f"t is fixed to {T_VARIABLES}")
        if self.T is None:
            object.__setattr__(self, "T", good_location_count(self.n, self.L, self.q))
        if self.rho >= self.q:
            raise ParameterError(f"rho={self.rho} must be below q={self.q}")
        if self.T < 1 or 2 * self.T >= self.q:
            raise ParameterError(f"need 1 <= T < q/2, got T={self.T}")
        if self.n - self.T < self.L + 1:
            raise ParameterError(f"need n - T >= L + 1, got n={self.n}, T={self.T}, L={self.L}")
        if self.n >= self.q ** self.t:
            raise ParameterError("support must be a proper subset of F_q^3")

    @classmethod
    def from_dict(cls, params: Dict[str, Any]) -> "ArmknechtParams":
        """Build params; missing q, rho or n are derived from (s, mu) by param_search."""
        s, mu, L = int(params["s"]), int(params["mu"]), int(params["L"])
        if all(key in params for key in ("q", "rho", "n")):
            return cls(s=s, mu=mu, L=L, q=int(params["q"]), rho=int(params["rho"]), n=int(params["n"]),
                       T=params.get("T"))
        found = param_search(s, mu)
        rho = int(params.get("rho", found.rho_min))
        q = int(params.get("q", found.q_min))
        interpolation_dim = qary_function_dim(T_VARIABLES, 2 * mu * rho)
        n = int(params.get("n", max(math.ceil(found.n_min), L + 1 + interpolation_dim + 4)))
        return cls(s=s, mu=mu, L=L, q=q, rho=rho, n=n, T=params.get("T"))

    def to_dict(self) -> Dict[str, int]:
        return {"s": self.s, "mu": self.mu, "L": self.L, "q": self.q, "rho": self.rho, "n": self.n, "T": self.T}


@dataclass(frozen=True, eq=False)
class ArmknechtSecretKey:
    """sk = (x, y, I) together with the code triple it defines."""

    params: ArmknechtParams
    x: np.ndarray
    y: Tuple[int, int, int]
    I: Tuple[int, ...]
    c_bar: QaryRM
    c: QaryRM
    c_tilde: QaryRM
    y_eval_c: "galois.FieldArray" = field(repr=False)
    y_eval_tilde: "galois.FieldArray" = field(repr=False)

    @property
    def field(self):
        return self.c.field


@dataclass(frozen=True, eq=False)
class ArmknechtCiphertext:
    c: "galois.FieldArray"
    gamma: int = 1


def _sample_support(params: ArmknechtParams, rng: RngStream) -> np.ndarray:
    q = params.q
    chosen, seen = [], set()
    while len(chosen) < params.n:
        code = rng.randbelow(q ** 3)
        if code not in seen:
            seen.add(code)
            chosen.append((code % q, (code // q) % q, code // (q * q)))
    return np.asarray(chosen, dtype=np.int64)


def _sample_y(x: np.ndarray, q: int, rng: RngStream) -> Tuple[int, int, int]:
    used = {int(v) for v in x[:, 0]}
    free = [v for v in range(q) if v not in used]
    if not free:
        raise ParameterError("every first coordinate is used by the support")
    return (free[rng.randbelow(len(free))], rng.randbelow(q), rng.randbelow(q))


def _determined_at_y(code: QaryRM, positions: Sequence[int], y_eval) -> bool:
    kernel = null_space(code.evaluations[list(positions), :])
    return kernel.shape[0] == 0 or not np.any(kernel @ y_eval != 0)


def keygen(params: ArmknechtParams, rng: RngStream, all_good: bool = False) -> ArmknechtSecretKey:
    """Sample (x, y, I) and build C_bar, C, C~ on the support.

    ``all_good`` makes every location good (a degenerate configuration for tests).
    """
    q, rho, mu = params.q, params.rho, params.mu
    for attempt in range(1, MAX_KEYGEN_RETRIES + 1):
        x = _sample_support(params, rng)
        y = _sample_y(x, q, rng)
        I = tuple(range(params.n)) if all_good else tuple(sorted(rng.sample(params.n, params.T)))
        c_bar = build_qary_rm(q, T_VARIABLES, rho, x)
        c = build_qary_rm(q, T_VARIABLES, 2 * rho, x)
        c_tilde = build_qary_rm(q, T_VARIABLES, 2 * mu * rho, x)
        special_zero_codeword(c_bar, y)

        y_eval_tilde = c_tilde.evaluate_at(y)
        if not _determined_at_y(c_tilde, I, y_eval_tilde):
            logger.debug(f"keygen attempt {attempt}: p(y) not determined on I, resampling")
            continue

        key = ArmknechtSecretKey(params=params, x=x, y=y, I=I, c_bar=c_bar, c=c, c_tilde=c_tilde,
                                 y_eval_c=c.evaluate_at(y), y_eval_tilde=y_eval_tilde)
        factors = [_random_codeword(key, rng) for _ in range(mu)]
        product = factors[0]
        for word in factors[1:]:
            product = product * word
        if not c_tilde.code.contains(product):
            raise ParameterError("C^mu is not contained in C~")
        logger.info(f"armknecht keygen: n={params.n}, T={params.T}, q={q}, rho={rho}, mu={mu} "
                    f"(attempt {attempt})")
        return key
    raise RetriesExhausted(f"no determinate key after {MAX_KEYGEN_RETRIES} attempts")


def _random_codeword(key: ArmknechtSecretKey, rng: RngStream):
    coeffs = rng.field_elements(key.field, key.c.function_dim)
    return key.c.encode_function(coeffs)


def encrypt(m: int, sk: ArmknechtSecretKey, rng: RngStream,
            ledger: Optional[EncryptionLedger] = None) -> ArmknechtCiphertext:
    """c = w + e with w = ev(p), p uniform among degree <= 2 rho functions with p(y) = m."""
    q = sk.params.q
    if not 0 <= int(m) < q:
        raise MessageError(f"message must lie in [0, {q}), got {m}")
    if ledger is not None:
        ledger.record()
    field_cls = sk.field
    coeffs = rng.field_elements(field_cls, sk.c.function_dim)
    # constant monomial comes first and evaluates to 1 at y
    coeffs[0] = coeffs[0] + (field_cls(int(m)) - sk.y_eval_c @ coeffs)
    w = sk.c.encode_function(coeffs)

    error = field_cls.Zeros(sk.params.n)
    good = set(sk.I)
    bad = [i for i in range(sk.params.n) if i not in good]
    if bad:
        error[bad] = rng.field_elements(field_cls, len(bad))
    return ArmknechtCiphertext(c=w + error, gamma=1)


def decrypt(ct: ArmknechtCiphertext, sk: ArmknechtSecretKey) -> int:
    """Interpolate inside C~ on the good locations and evaluate at y."""
    if ct.gamma > sk.params.mu:
        raise GammaExceeded(f"gamma={ct.gamma} exceeds mu={sk.params.mu}")
    value = interpolate_eval(ct.c, sk.I, sk.c_tilde.evaluations, sk.y_eval_tilde)
    return int(value)


def eval_add(ct1: ArmknechtCiphertext, ct2: ArmknechtCiphertext) -> ArmknechtCiphertext:
    return ArmknechtCiphertext(c=ct1.c + ct2.c, gamma=max(ct1.gamma, ct2.gamma))


def eval_mult(ct1: ArmknechtCiphertext, ct2: ArmknechtCiphertext, mu: int) -> ArmknechtCiphertext:
    gamma = ct1.gamma + ct2.gamma
    if gamma > mu:
        raise BudgetExceeded(f"gamma {ct1.gamma} + {ct2.gamma} exceeds mu={mu}")
    return ArmknechtCiphertext(c=ct1.c * ct2.c, gamma=gamma)


def error_support(ct: ArmknechtCiphertext, sk: ArmknechtSecretKey) -> Tuple[int, ...]:
    """Locations where the ciphertext departs from the codeword interpolated on I."""
    space_eval = sk.c_tilde.evaluations
    index = list(sk.I)
    coeffs = solve_linear(space_eval[index, :], ct.c[index])
    return support(ct.c - space_eval @ coeffs)


# ---------------------------------------------------------------------------
# Envelope adapter
# ---------------------------------------------------------------------------


class ArmknechtAdapter(SchemeAdapter):
    scheme = SchemeId.ARMKNECHT
    supported_ops = frozenset({"add", "mult"})

    def build_keys(self, params, rng):
        return keygen(ArmknechtParams.from_dict(params), rng)

    def make_ledger(self, keys: ArmknechtSecretKey) -> EncryptionLedger:
        return EncryptionLedger(limit=keys.params.L, label="armknecht")

    def parse_message(self, obj, keys):
        if isinstance(obj, bool) or not isinstance(obj, int):
            raise MessageError(f"armknecht messages are integers, got {obj!r}")
        if not 0 <= obj < keys.params.q:
            raise MessageError(f"message must lie in [0, {keys.params.q})")
        return obj

    def format_message(self, message):
        return int(message)

    def random_message(self, rng, keys):
        return rng.randbelow(keys.params.q)

    def expected(self, op, messages, keys):
        # messages are integer representations of GF(q) elements, so q = p^k needs field arithmetic
        if op in ("add", "mult"):
            a, b = (keys.field(int(m)) for m in messages[:2])
            return int(a + b) if op == "add" else int(a * b)
        return super().expected(op, messages, keys)

    def mult_budget(self, keys):
        return keys.params.mu

    def _payload(self, c, keys) -> bytes:
        return pack_ints(as_ints(c), int_width(keys.params.q))

    def _vector(self, envelope, keys):
        values = unpack_ints(envelope.payload, int_width(keys.params.q), keys.params.n)
        return keys.field(np.asarray(values, dtype=np.int64) % keys.params.q)

    def encrypt_envelope(self, message, keys, rng):
        ct = encrypt(message, keys, rng, ledger=self.ledger(keys))
        return CiphertextEnvelope(self.scheme, self._payload(ct.c, keys), gamma=ct.gamma)

    def decrypt_envelope(self, envelope, keys):
        return decrypt(ArmknechtCiphertext(self._vector(envelope, keys), envelope.gamma), keys)

    def evaluate(self, op, envelopes, keys, operand=None):
        cts = [ArmknechtCiphertext(self._vector(e, keys), e.gamma) for e in envelopes]
        if op == "add":
            out = eval_add(*cts)
        else:
            out = eval_mult(cts[0], cts[1], keys.params.mu)
        return CiphertextEnvelope(self.scheme, self._payload(out.c, keys), gamma=out.gamma)
