"""Scale-invariant RLWE scheme on Z_q[x]/(x^n+1) with relinearization.

Plaintexts live in R_p and are embedded as Delta * m with Delta = floor(q/p).
Tensor products are taken over the integers on centered representatives and
only then divided by Delta and reduced; ``literal=True`` reduces mod q first,
which is kept for comparison only.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from sympy import isprime

from src.algebra import RingCtx, RingElement, centered, negacyclic_convolve, round_div
from src.config import LINDNER_PEIKERT_NUMERATOR, LINDNER_PEIKERT_OFFSET
from src.exceptions import Corrupt, MessageError, ParameterError, RetriesExhausted
from src.he_core import (
    CiphertextEnvelope,
    NoiseReport,
    RngStream,
    SchemeAdapter,
    SchemeId,
    pack_bigints,
    unpack_bigints,
)

logger = logging.getLogger(__name__)


def bfv_modulus(q_bits: int, n: int, p: int) -> int:
    """Largest prime q < 2^q_bits with q = 1 mod lcm(2n, p)."""
    step = math.lcm(2 * n, p)
    k = (2 ** q_bits - 2) // step
    while k > 0:
        q = k * step + 1
        if isprime(q):
            return q
        k -= 1
    raise RetriesExhausted(f"no prime q = 1 mod {step} below 2^{q_bits}")


@dataclass(frozen=True)
class BFVParams:
    n: int
    q: int
    p: int
    relin_factor: Optional[int] = None
    sigma: float = 1.0
    literal: bool = False

    def __post_init__(self):
        if self.n < 1 or self.n & (self.n - 1):
            raise ParameterError(f"n must be a power of 2, got {self.n}")
        if not 2 <= self.p < self.q:
            raise ParameterError(f"need 2 <= p < q, got p={self.p}, q={self.q}")
        if self.relin_factor is None:
            object.__setattr__(self, "relin_factor", self.q ** 2)
        if self.relin_factor < self.q:
            raise ParameterError("relinearization factor must be at least q")

    @property
    def delta(self) -> int:
        return self.q // self.p

    @property
    def ring(self) -> RingCtx:
        return RingCtx(self.q, degree=self.n)

    @property
    def relin_ring(self) -> RingCtx:
        return RingCtx(self.q * self.relin_factor, degree=self.n)

    @classmethod
    def from_dict(cls, params: Dict[str, Any]) -> "BFVParams":
        n, p = int(params["n"]), int(params["p"])
        q = int(params["q"]) if "q" in params else bfv_modulus(int(params["q_bits"]), n, p)
        relin = params.get("l")
        return cls(n=n, q=q, p=p, relin_factor=int(relin) if relin is not None else None,
                   sigma=float(params.get("sigma", 1.0)), literal=bool(params.get("literal", False)))


@dataclass(frozen=True)
class BFVKeys:
    params: BFVParams
    s: RingElement
    pk: Tuple[RingElement, RingElement]
    rlk: Tuple[RingElement, RingElement]
    e: RingElement  # public-key error, kept for noise audits
    e_relin: RingElement


@dataclass(frozen=True)
class BFVCiphertext:
    c0: RingElement
    c1: RingElement


def _ternary(ctx: RingCtx, rng: RngStream) -> RingElement:
    return RingElement.from_ints(ctx, rng.ternary(ctx.n))


def _uniform(ctx: RingCtx, rng: RngStream) -> RingElement:
    return RingElement(ctx, tuple(rng.uniform_ints(ctx.coeff_modulus, ctx.n)))


def _lift(x: RingElement, ctx: RingCtx) -> RingElement:
    """Same centered coefficients viewed in another ring."""
    return RingElement.from_ints(ctx, x.centered())


def keygen(params: BFVParams, rng: RngStream) -> BFVKeys:
    ring, big = params.ring, params.relin_ring
    s = _ternary(ring, rng)
    a, e = _uniform(ring, rng), _ternary(ring, rng)
    pk = (-(a * s + e), a)
    s_big = _lift(s, big)
    a2, e2 = _uniform(big, rng), _ternary(big, rng)
    rlk = (-(a2 * s_big + e2) + (s_big * s_big) * params.relin_factor, a2)
    keys = BFVKeys(params=params, s=s, pk=pk, rlk=rlk, e=e, e_relin=_lift(e2, ring))
    if pk[0] + pk[1] * s + e != RingElement.zero(ring):
        raise ParameterError("public key identity failed")
    logger.info(f"bfv keygen: n={params.n}, q has {params.q.bit_length()} bits, p={params.p}, "
                f"Delta={params.delta}")
    return keys


def check_message(m: Sequence[int], params: BFVParams) -> List[int]:
    values = [int(v) for v in m]
    if len(values) != params.n:
        raise MessageError(f"messages have {params.n} coefficients, got {len(values)}")
    if any(not 0 <= v < params.p for v in values):
        raise MessageError(f"message coefficients must lie in [0, {params.p})")
    return values


def encrypt(m: Sequence[int], keys: BFVKeys, rng: RngStream, u: Optional[Sequence[int]] = None,
            e1: Optional[Sequence[int]] = None, e2: Optional[Sequence[int]] = None) -> BFVCiphertext:
    """ct = (pk0 u + Delta m + e1, pk1 u + e2); ``u``, ``e1`` and ``e2`` override the ternary samples."""
    params = keys.params
    ring = params.ring
    values = check_message(m, params)
    u = RingElement.from_ints(ring, u) if u is not None else _ternary(ring, rng)
    e1 = RingElement.from_ints(ring, e1) if e1 is not None else _ternary(ring, rng)
    e2 = RingElement.from_ints(ring, e2) if e2 is not None else _ternary(ring, rng)
    scaled = RingElement.from_ints(ring, (params.delta * v for v in values))
    return BFVCiphertext(keys.pk[0] * u + scaled + e1, keys.pk[1] * u + e2)


def phase(ct: BFVCiphertext, keys: BFVKeys) -> List[int]:
    """Centered coefficients of ct0 + s ct1 mod q."""
    return (ct.c0 + keys.s * ct.c1).centered()


def decrypt(ct: BFVCiphertext, keys: BFVKeys) -> List[int]:
    params = keys.params
    return [round_div(x, params.delta) % params.p for x in phase(ct, keys)]


def noise_norm(ct: BFVCiphertext, keys: BFVKeys) -> int:
    """Infinity norm of the phase minus its nearest multiple of Delta."""
    delta = keys.params.delta
    return max(abs(x - round_div(x, delta) * delta) for x in phase(ct, keys))


def decrypt_with_report(ct: BFVCiphertext, keys: BFVKeys):
    observed = noise_norm(ct, keys)
    bound = keys.params.delta / 2
    report = NoiseReport(SchemeId.BFV, observed=float(observed), bound=bound, correct=observed < bound)
    return decrypt(ct, keys), report


def planted_ciphertext(m: Sequence[int], noise: Sequence[int], params: BFVParams) -> BFVCiphertext:
    """(Delta m + noise, 0), decryptable under any secret."""
    ring = params.ring
    values = check_message(m, params)
    c0 = RingElement.from_ints(ring, (params.delta * v + int(e) for v, e in zip(values, noise)))
    return BFVCiphertext(c0, RingElement.zero(ring))


def eval_add(ct1: BFVCiphertext, ct2: BFVCiphertext) -> BFVCiphertext:
    return BFVCiphertext(ct1.c0 + ct2.c0, ct1.c1 + ct2.c1)


def _scaled_product(terms: Sequence[Tuple[RingElement, RingElement]], params: BFVParams) -> RingElement:
    """round(sum x*y / Delta) mod q with the products taken over Z."""
    n, q = params.n, params.q
    total = [0] * n
    for x, y in terms:
        if params.literal:
            product = [c % q for c in negacyclic_convolve(x.coeffs, y.coeffs)]
        else:
            product = negacyclic_convolve(x.centered(), y.centered())
        total = [a + b for a, b in zip(total, product)]
    return RingElement.from_ints(params.ring, (round_div(c, params.delta) for c in total))


def tensor(ct1: BFVCiphertext, ct2: BFVCiphertext, params: BFVParams) -> Tuple[RingElement, RingElement, RingElement]:
    """Degree-2 ciphertext (c0, c1, c2) before relinearization."""
    c0 = _scaled_product([(ct1.c0, ct2.c0)], params)
    c1 = _scaled_product([(ct1.c0, ct2.c1), (ct1.c1, ct2.c0)], params)
    c2 = _scaled_product([(ct1.c1, ct2.c1)], params)
    return c0, c1, c2


def relinearize(c2: RingElement, keys: BFVKeys) -> Tuple[RingElement, RingElement]:
    """(round(c2 rlk0 / l), round(c2 rlk1 / l)) mod q."""
    params = keys.params
    out = []
    for part in keys.rlk:
        product = negacyclic_convolve(c2.centered(), part.centered())
        out.append(RingElement.from_ints(params.ring, (round_div(c, params.relin_factor) for c in product)))
    return out[0], out[1]


def eval_mult(ct1: BFVCiphertext, ct2: BFVCiphertext, keys: BFVKeys) -> BFVCiphertext:
    c0, c1, c2 = tensor(ct1, ct2, keys.params)
    r0, r1 = relinearize(c2, keys)
    return BFVCiphertext(c0 + r0, c1 + r1)


def plaintext_add(m1: Sequence[int], m2: Sequence[int], p: int) -> List[int]:
    return [(a + b) % p for a, b in zip(m1, m2)]


def plaintext_mult(m1: Sequence[int], m2: Sequence[int], p: int) -> List[int]:
    """Product in Z_p[x]/(x^n+1)."""
    return [c % p for c in negacyclic_convolve(list(m1), list(m2))]


def security_check(n: int, q: int, sigma: float, lam: int = 128, eps: float = 2.0 ** -64) -> Dict[str, Any]:
    """Lattice-reduction relation alpha q / sigma < 2^(2 sqrt(n log2 q log2 delta)).

    Args:
        n: ring degree.
        q: ciphertext modulus.
        sigma: noise parameter.
        lam: target security in bits.
        eps: distinguishing advantage.

    Returns:
        dict with both sides in log2, the margin in bits and the verdict.
    """
    if not 0 < eps <= 1 or sigma <= 0:
        raise ParameterError("need 0 < eps <= 1 and sigma > 0")
    log2_delta = LINDNER_PEIKERT_NUMERATOR / (lam + LINDNER_PEIKERT_OFFSET)
    alpha = math.sqrt(math.log(1 / eps) / math.pi)
    rhs_log2 = 2 * math.sqrt(n * math.log2(q) * log2_delta)
    lhs_log2 = math.log2(alpha * q / sigma) if alpha > 0 else -math.inf
    margin = rhs_log2 - lhs_log2
    return {
        "lambda": lam,
        "log2_delta": log2_delta,
        "alpha": alpha,
        "lhs_log2": lhs_log2,
        "rhs_log2": rhs_log2,
        "margin_bits": margin,
        "passed": margin > 0,
    }


class BFVAdapter(SchemeAdapter):
    scheme = SchemeId.BFV
    supported_ops = frozenset({"add", "mult"})

    def build_keys(self, params, rng):
        return keygen(BFVParams.from_dict(params), rng)

    def public_sections(self, keys):
        return {
            "pk": pack_bigints([*keys.pk[0].coeffs, *keys.pk[1].coeffs]),
            "rlk": pack_bigints([*keys.rlk[0].coeffs, *keys.rlk[1].coeffs]),
        }

    def parse_message(self, obj, keys):
        if not isinstance(obj, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in obj):
            raise MessageError("bfv messages are lists of integers")
        return check_message(obj, keys.params)

    def format_message(self, message):
        return [int(v) for v in message]

    def random_message(self, rng, keys):
        return rng.uniform_ints(keys.params.p, keys.params.n)

    def expected(self, op, messages, keys):
        if op == "add":
            return plaintext_add(*messages, keys.params.p)
        if op == "mult":
            return plaintext_mult(*messages, keys.params.p)
        return super().expected(op, messages, keys)

    def _ciphertext(self, envelope, keys) -> BFVCiphertext:
        n, q = keys.params.n, keys.params.q
        values = unpack_bigints(envelope.payload)
        if len(values) != 2 * n or any(not 0 <= v < q for v in values):
            raise Corrupt(f"bfv ciphertext needs {2 * n} coefficients in [0, q)")
        ring = keys.params.ring
        return BFVCiphertext(RingElement(ring, tuple(values[:n])), RingElement(ring, tuple(values[n:])))

    def _envelope(self, ct: BFVCiphertext) -> CiphertextEnvelope:
        return CiphertextEnvelope(self.scheme, pack_bigints([*ct.c0.coeffs, *ct.c1.coeffs]))

    def encrypt_envelope(self, message, keys, rng):
        return self._envelope(encrypt(message, keys, rng))

    def decrypt_envelope(self, envelope, keys):
        return decrypt(self._ciphertext(envelope, keys), keys)

    def evaluate(self, op, envelopes, keys, operand=None):
        ct1, ct2 = (self._ciphertext(e, keys) for e in envelopes)
        out = eval_add(ct1, ct2) if op == "add" else eval_mult(ct1, ct2, keys)
        return self._envelope(out)
