"""Asymmetric somewhat-homomorphic scheme over F_q with secret Vandermonde rows.

Rows of the key matrix M indexed by the secret set S are truncated power
vectors (a_i, ..., a_i^(s/3), 0, ..., 0); every other row runs up to a_i^r.
Decryption annihilates the codeword part with a combination y supported on S.

This construction is broken in the literature and exists for study only.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional

import galois
import numpy as np
from sympy import nextprime, prevprime

from src.algebra import as_ints, null_space, solve_linear
from src.config import MAX_SAMPLE_RETRIES
from src.exceptions import Inconsistent, MessageError, NoAnnihilator, ParameterError, RetriesExhausted
from src.he_core import (
    CiphertextEnvelope,
    NoiseReport,
    RngStream,
    SchemeAdapter,
    SchemeId,
    int_width,
    pack_ints,
    unpack_ints,
)

logger = logging.getLogger(__name__)

INSECURE_NOTICE = "this scheme is not secure: keys generated here are for study only"


def _round_to_multiple_of_3(value: float) -> int:
    return max(3, 3 * round(value / 3))


@dataclass(frozen=True)
class BLParams:
    n: int
    s: int
    r: int
    q: int
    eta: float
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.s % 3:
            raise ParameterError(f"s must be divisible by 3, got {self.s}")
        if not 3 <= self.s <= self.n:
            raise ParameterError(f"need 3 <= s <= n, got s={self.s}, n={self.n}")
        if not self.s // 3 < self.r:
            raise ParameterError(f"need s/3 < r, got s={self.s}, r={self.r}")
        if not galois.is_prime(self.q):
            raise ParameterError(f"q must be prime, got {self.q}")
        if self.q <= self.n:
            raise ParameterError("q must exceed n so the points a_i can be distinct and nonzero")
        if not 0.0 <= self.eta < 1.0:
            raise ParameterError(f"eta must lie in [0, 1), got {self.eta}")

    @property
    def third(self) -> int:
        return self.s // 3

    @classmethod
    def from_recipe(cls, n: int, alpha: float) -> "BLParams":
        """s = n^(alpha/4) rounded to a multiple of 3, r = n^(1-alpha/8), q >= 2^(n^alpha), eta = n^-(1-alpha/4).

        q is also kept above n + 1 so that n distinct nonzero points exist.
        """
        if not 0 < alpha <= 0.25:
            raise ParameterError(f"alpha must lie in (0, 1/4], got {alpha}")
        s = _round_to_multiple_of_3(n ** (alpha / 4))
        r = math.ceil(n ** (1 - alpha / 8))
        q = int(nextprime(max(math.ceil(2 ** (n ** alpha)), n + 2) - 1))
        eta = 1.0 / n ** (1 - alpha / 4)
        return cls(n=n, s=s, r=r, q=q, eta=eta, alpha=alpha)

    @classmethod
    def from_dict(cls, params: Dict[str, Any]) -> "BLParams":
        if "alpha" in params and "s" not in params:
            return cls.from_recipe(int(params["n"]), float(params["alpha"]))
        q = int(params["q"]) if "q" in params else int(prevprime(2 ** int(params["q_bits"])))
        return cls(n=int(params["n"]), s=int(params["s"]), r=int(params["r"]), q=q,
                   eta=float(params.get("eta", 0.0)))


@dataclass(frozen=True, eq=False)
class BLSecretKey:
    params: BLParams
    S: tuple
    M: "galois.FieldArray"
    a: "galois.FieldArray"


@dataclass(frozen=True, eq=False)
class BLPublicKey:
    params: BLParams
    P: "galois.FieldArray"
    R: "galois.FieldArray"


@dataclass(frozen=True, eq=False)
class BLKeyPair:
    sk: BLSecretKey
    pk: BLPublicKey


def _distinct_nonzero(field, count: int, rng: RngStream):
    seen, values = set(), []
    for _ in range(MAX_SAMPLE_RETRIES):
        if len(values) == count:
            break
        v = 1 + rng.randbelow(field.order - 1)
        if v not in seen:
            seen.add(v)
            values.append(v)
    if len(values) < count:
        raise RetriesExhausted(f"could not draw {count} distinct nonzero points")
    return field(np.asarray(values, dtype=np.int64))


def _unit_determinant_matrix(field, r: int, rng: RngStream):
    """Identity transformed by r^2 random row additions R_i += c R_j (i != j)."""
    R = field.Identity(r)
    for _ in range(r * r):
        i, j = rng.sample(r, 2)
        c = field(rng.randbelow(field.order))
        R[i] = R[i] + c * R[j]
    return R


def keygen(params: BLParams, rng: RngStream) -> BLKeyPair:
    logger.warning(f"bogdanov-lee: {INSECURE_NOTICE}")
    field = galois.GF(params.q)
    S = tuple(sorted(rng.sample(params.n, params.s)))
    a = _distinct_nonzero(field, params.n, rng)
    columns = [a]
    for _ in range(params.r - 1):
        columns.append(columns[-1] * a)
    M = field(np.stack([as_ints(col) for col in columns], axis=1))
    M[list(S), params.third:] = 0
    R = _unit_determinant_matrix(field, params.r, rng)
    P = M @ R
    logger.info(f"bogdanov-lee keygen: n={params.n}, s={params.s}, r={params.r}, q={params.q}")
    return BLKeyPair(sk=BLSecretKey(params=params, S=S, M=M, a=a), pk=BLPublicKey(params=params, P=P, R=R))


def encrypt(m: int, pk: BLPublicKey, rng: RngStream, zero_x: bool = False, eta: Optional[float] = None):
    """c = P x + m 1 + e with P[e_i != 0] = eta and nonzero e_i uniform."""
    params = pk.params
    if not 0 <= int(m) < params.q:
        raise MessageError(f"message must lie in [0, {params.q})")
    field = type(pk.P)
    eta = params.eta if eta is None else eta
    x = field.Zeros(params.r) if zero_x else rng.field_elements(field, params.r)
    e = field.Zeros(params.n)
    for i in range(params.n):
        if eta > 0 and rng.bernoulli(eta):
            e[i] = 1 + rng.randbelow(params.q - 1)
    return pk.P @ x + field(int(m)) + e


def equation_count(params: BLParams, degree_cap: int) -> int:
    """J = min(d s/3, s - 2) power equations."""
    return min(degree_cap * params.third, params.s - 2)


@lru_cache(maxsize=64)
def annihilator(sk: BLSecretKey, degree_cap: int = 1):
    """y on S with sum y_i a_i^j = 0 for j = 1..J and sum y_i = 1.

    The returned solution has full support on S when one is found among a
    deterministic sequence of combinations of the null basis.
    """
    if degree_cap < 1:
        raise ParameterError(f"degree_cap must be >= 1, got {degree_cap}")
    params = sk.params
    field = type(sk.M)
    a_S = sk.a[list(sk.S)]
    J = equation_count(params, degree_cap)
    rows = [field.Ones(params.s)] + [a_S ** j for j in range(1, J + 1)]
    A = field(np.stack([as_ints(row) for row in rows]))
    rhs = field.Zeros(J + 1)
    rhs[0] = 1
    try:
        space = solve_linear(A, rhs, mode="basis")
    except Inconsistent as exc:
        raise NoAnnihilator(f"no annihilator for degree_cap={degree_cap}") from exc

    y = space.particular
    if space.dimension:
        for t in range(1, 64):
            weights = field(np.asarray([pow(t, k + 1, params.q) for k in range(space.dimension)], dtype=np.int64))
            candidate = space.particular + weights @ space.basis
            if np.all(candidate != 0):
                y = candidate
                break
        else:
            logger.debug("no full-support annihilator found, using the pivot solution")
    return y


def decrypt(c, sk: BLSecretKey, degree_cap: int = 1) -> int:
    y = annihilator(sk, degree_cap)
    return int(y @ c[list(sk.S)])


def decrypt_with_report(c, sk: BLSecretKey, degree_cap: int = 1):
    """Decrypt and count parity violations of c|_S against the powers the annihilator cancels.

    The observed value is the number of nonzero syndrome entries; zero means
    the restriction to S carries no error.
    """
    message = decrypt(c, sk, degree_cap)
    field = type(sk.M)
    a_S = sk.a[list(sk.S)]
    J = equation_count(sk.params, degree_cap)
    basis = field(np.stack([as_ints(a_S ** j) for j in range(J + 1)]))
    parity = null_space(basis)
    if parity.shape[0] == 0:
        observed = 0
    else:
        observed = int(np.count_nonzero(parity @ c[list(sk.S)]))
    report = NoiseReport(SchemeId.BOGDANOV_LEE, observed=float(observed), bound=1.0, correct=observed == 0)
    return message, report


def eval_add(c1, c2):
    if len(c1) != len(c2):
        raise ParameterError("ciphertext lengths differ")
    return c1 + c2


def eval_mult(c1, c2):
    if len(c1) != len(c2):
        raise ParameterError("ciphertext lengths differ")
    return c1 * c2


def fresh_failure_count(keys: BLKeyPair, rng: RngStream, trials: int, eta: float) -> int:
    """Fresh ciphertexts at noise rate eta that decrypt to the wrong message."""
    failures = 0
    for _ in range(trials):
        m = rng.randbelow(keys.pk.params.q)
        failures += int(decrypt(encrypt(m, keys.pk, rng, eta=eta), keys.sk) != m)
    return failures


def product_success_counts(keys: BLKeyPair, rng: RngStream, trials: int, eta: float = 0.0) -> Dict[int, int]:
    """Correct product decryptions per degree_cap in {1, 2}."""
    q = keys.pk.params.q
    counts = {1: 0, 2: 0}
    for _ in range(trials):
        m1, m2 = rng.randbelow(q), rng.randbelow(q)
        product = eval_mult(encrypt(m1, keys.pk, rng, eta=eta), encrypt(m2, keys.pk, rng, eta=eta))
        for cap in counts:
            counts[cap] += int(decrypt(product, keys.sk, cap) == (m1 * m2) % q)
    return counts


class BogdanovLeeAdapter(SchemeAdapter):
    scheme = SchemeId.BOGDANOV_LEE
    supported_ops = frozenset({"add", "mult"})

    def build_keys(self, params, rng):
        return keygen(BLParams.from_dict(params), rng)

    def public_sections(self, keys):
        return {"P": pack_ints(as_ints(keys.pk.P).reshape(-1), int_width(keys.pk.params.q))}

    def parse_message(self, obj, keys):
        if isinstance(obj, bool) or not isinstance(obj, int) or not 0 <= obj < keys.pk.params.q:
            raise MessageError(f"bogdanov-lee messages are integers in [0, {keys.pk.params.q})")
        return obj

    def format_message(self, message):
        return int(message)

    def random_message(self, rng, keys):
        return rng.randbelow(keys.pk.params.q)

    def expected(self, op, messages, keys):
        q = keys.pk.params.q
        if op == "add":
            return (messages[0] + messages[1]) % q
        if op == "mult":
            return (messages[0] * messages[1]) % q
        return super().expected(op, messages, keys)

    def mult_budget(self, keys):
        params = keys.pk.params
        return max(1, (params.s - 2) // params.third)

    def _vector(self, envelope, keys):
        params = keys.pk.params
        values = unpack_ints(envelope.payload, int_width(params.q), params.n)
        return type(keys.pk.P)(np.asarray(values, dtype=np.int64) % params.q)

    def _envelope(self, c, keys):
        return CiphertextEnvelope(self.scheme, pack_ints(as_ints(c), int_width(keys.pk.params.q)))

    def encrypt_envelope(self, message, keys, rng):
        return self._envelope(encrypt(message, keys.pk, rng), keys)

    def decrypt_envelope(self, envelope, keys):
        return decrypt(self._vector(envelope, keys), keys.sk, degree_cap=max(1, envelope.gamma))

    def evaluate(self, op, envelopes, keys, operand=None):
        c1, c2 = (self._vector(e, keys) for e in envelopes)
        return self._envelope(eval_add(c1, c2) if op == "add" else eval_mult(c1, c2), keys)
