"""Approximate-arithmetic RLWE scheme with canonical-embedding encoding and rescaling.

Slots are evaluations at the primitive 2n-th roots xi^(2j+1), j = 0..n-1; a
vector z in C^(n/2) is completed to (z, reversed conjugates) so the preimage
polynomial is real. The embedding runs in numpy long double; ``*_oracle``
functions recompute it with mpmath for error audits.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from src.algebra import RingCtx, RingElement, negacyclic_convolve, round_div
from src.config import CKKS_TOLERANCE
from src.exceptions import Corrupt, LevelExhausted, LevelMismatch, MessageError, ParameterError
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

ORACLE_DPS = 50  # decimal digits, above 128 bits


@dataclass(frozen=True)
class CKKSParams:
    n: int
    delta: int
    p: int
    q0: int
    L: int
    h: int
    P: int
    sigma: float = 3.2

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ParameterError(f"n must be a power of 2 and at least 2, got {self.n}")
        if self.delta <= 1 or self.p < 2 or self.q0 < 2 or self.P < 1:
            raise ParameterError("need delta > 1, p >= 2, q0 >= 2 and P >= 1")
        if self.L < 0 or not 0 < self.h <= self.n:
            raise ParameterError(f"need L >= 0 and 0 < h <= n, got L={self.L}, h={self.h}")
        if self.sigma < 0:
            raise ParameterError("sigma must be non-negative")

    @property
    def slots(self) -> int:
        return self.n // 2

    def q_level(self, level: int) -> int:
        """q_l = p^l q0."""
        if level < 0:
            raise LevelExhausted(f"level {level} is below the bottom of the chain")
        if level > self.L:
            raise ParameterError(f"level {level} is above the top of the chain L={self.L}")
        return self.p ** level * self.q0

    def ring(self, level: int) -> RingCtx:
        return RingCtx(self.q_level(level), degree=self.n)

    @property
    def evk_ring(self) -> RingCtx:
        return RingCtx(self.P * self.q_level(self.L), degree=self.n)

    @classmethod
    def from_dict(cls, params: Dict[str, Any]) -> "CKKSParams":
        def power(name):
            if name in params:
                return int(params[name])
            return 2 ** int(params[f"{name}_log2"])

        return cls(n=int(params["n"]), delta=power("delta"), p=power("p"), q0=power("q0"), L=int(params["L"]),
                   h=int(params["h"]), P=power("P"), sigma=float(params.get("sigma", 3.2)))


# ---------------------------------------------------------------------------
# Canonical embedding
# ---------------------------------------------------------------------------


_PI_LD = np.longdouble("3.14159265358979323846264338327950288")


def _angles(n: int) -> np.ndarray:
    """pi (2i+1) j / n reduced through exact integer arithmetic, in long double."""
    i = np.arange(n).reshape(-1, 1)
    j = np.arange(n).reshape(1, -1)
    k = ((2 * i + 1) * j) % (2 * n)
    return k.astype(np.longdouble) * _PI_LD / np.longdouble(n)


def _to_longdouble(values: Sequence[int]) -> np.ndarray:
    out = np.empty(len(values), dtype=np.longdouble)
    for idx, v in enumerate(values):
        v = int(v)
        out[idx] = np.longdouble(v) if abs(v) < 2 ** 63 else np.longdouble(str(v))
    return out


def expand(z: Sequence[complex]) -> List[complex]:
    """(z_1..z_{n/2}, conj z_{n/2} .. conj z_1)."""
    z = [complex(v) for v in z]
    return z + [v.conjugate() for v in reversed(z)]


def _check_slots(z: Sequence[complex], params_n: int) -> List[complex]:
    values = [complex(v) for v in z]
    if len(values) != params_n // 2:
        raise MessageError(f"expected {params_n // 2} slots, got {len(values)}")
    if not all(math.isfinite(v.real) and math.isfinite(v.imag) for v in values):
        raise MessageError("slot values must be finite")
    return values


def encode(z: Sequence[complex], delta: int, n: int) -> List[int]:
    """Nearest-integer coordinates of delta * expand(z) in the basis sigma(X^j)."""
    values = expand(_check_slots(z, n))
    theta = _angles(n)
    re = np.asarray([v.real for v in values], dtype=np.longdouble).reshape(-1, 1)
    im = np.asarray([v.imag for v in values], dtype=np.longdouble).reshape(-1, 1)
    # <w, b_j> / <b_j, b_j> with b_j = sigma(X^j) and <b_j, b_j> = n
    coords = (re * np.cos(theta) + im * np.sin(theta)).sum(axis=0) * np.longdouble(delta) / np.longdouble(n)
    return [int(c) for c in np.rint(coords)]


def embed(g: Sequence[int], n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Real and imaginary parts of g(xi^(2i+1)) for i = 0..n-1."""
    theta = _angles(n)
    coeffs = _to_longdouble(g).reshape(1, -1)
    return (coeffs * np.cos(theta)).sum(axis=1), (coeffs * np.sin(theta)).sum(axis=1)


def decode(g: Sequence[int], delta, n: int) -> List[complex]:
    """First n/2 slots of sigma(g) / delta."""
    re, im = embed(g, n)
    ratio = Fraction(delta)
    scale = _to_longdouble([ratio.numerator])[0] / _to_longdouble([ratio.denominator])[0]
    return [complex(float(r / scale), float(i / scale)) for r, i in zip(re[: n // 2], im[: n // 2])]


def encode_oracle(z: Sequence[complex], delta: int, n: int, dps: int = ORACLE_DPS) -> List[int]:
    """High-precision encode, rounding ties to even."""
    values = expand(_check_slots(z, n))
    out = []
    with mpmath.workdps(dps):
        for j in range(n):
            total = mpmath.mpf(0)
            for i, w in enumerate(values):
                angle = mpmath.pi * (((2 * i + 1) * j) % (2 * n)) / n
                total += mpmath.mpf(w.real) * mpmath.cos(angle) + mpmath.mpf(w.imag) * mpmath.sin(angle)
            out.append(int(mpmath.nint(total * delta / n)))
    return out


def decode_oracle(g: Sequence[int], delta, n: int, dps: int = ORACLE_DPS) -> List[complex]:
    """High-precision decode returned as Python complex numbers."""
    out = []
    with mpmath.workdps(dps):
        scale = mpmath.mpf(Fraction(delta).numerator) / Fraction(delta).denominator
        for i in range(n // 2):
            total = mpmath.mpc(0)
            for j, c in enumerate(g):
                total += int(c) * mpmath.expjpi(mpmath.mpf(((2 * i + 1) * j) % (2 * n)) / n)
            out.append(complex(total / scale))
    return out


def max_error(got: Sequence[complex], want: Sequence[complex]) -> float:
    return max((abs(complex(a) - complex(b)) for a, b in zip(got, want)), default=0.0)


def within_tolerance(got: Sequence[complex], want: Sequence[complex], tolerance: float = CKKS_TOLERANCE) -> bool:
    """Max-norm error relative to max(1, |want|_inf)."""
    scale = max([1.0] + [abs(complex(w)) for w in want])
    return max_error(got, want) <= tolerance * scale


# ---------------------------------------------------------------------------
# Keys and ciphertexts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CKKSKeys:
    params: CKKSParams
    s: RingElement  # modulo q_L
    pk: Tuple[RingElement, RingElement]
    evk: Tuple[RingElement, RingElement]
    e: RingElement
    e_evk: RingElement


@dataclass(frozen=True)
class CKKSCiphertext:
    c0: RingElement
    c1: RingElement
    level: int
    scale: Fraction


def _gaussian(ctx: RingCtx, sigma: float, rng: RngStream) -> RingElement:
    return RingElement.from_ints(ctx, (rng.discrete_gaussian(sigma) for _ in range(ctx.n)))


def _uniform(ctx: RingCtx, rng: RngStream) -> RingElement:
    return RingElement(ctx, tuple(rng.uniform_ints(ctx.coeff_modulus, ctx.n)))


def _zero_one_half(ctx: RingCtx, rng: RngStream) -> RingElement:
    """Coefficients -1 and 1 with probability 1/4 each, 0 with probability 1/2."""
    values = []
    for _ in range(ctx.n):
        draw = rng.randbelow(4)
        values.append(-1 if draw == 0 else 1 if draw == 1 else 0)
    return RingElement.from_ints(ctx, values)


def _reduce(x: RingElement, ctx: RingCtx) -> RingElement:
    """Canonical residues viewed modulo a divisor of the current modulus."""
    return RingElement.from_ints(ctx, x.coeffs)


def _lift(x: RingElement, ctx: RingCtx) -> RingElement:
    return RingElement.from_ints(ctx, x.centered())


def hamming_secret(n: int, h: int, rng: RngStream) -> List[int]:
    values = [0] * n
    for idx in rng.sample(n, h):
        values[idx] = 1 if rng.randbelow(2) else -1
    return values


def keygen(params: CKKSParams, rng: RngStream) -> CKKSKeys:
    top, big = params.ring(params.L), params.evk_ring
    s = RingElement.from_ints(top, hamming_secret(params.n, params.h, rng))
    a, e = _uniform(top, rng), _gaussian(top, params.sigma, rng)
    pk = (-(a * s) + e, a)
    s_big = _lift(s, big)
    a2, e2 = _uniform(big, rng), _gaussian(big, params.sigma, rng)
    evk = (-(a2 * s_big) + e2 + (s_big * s_big) * params.P, a2)
    logger.info(f"ckks keygen: n={params.n}, L={params.L}, q_L has {params.q_level(params.L).bit_length()} bits, "
                f"h={params.h}")
    return CKKSKeys(params=params, s=s, pk=pk, evk=evk, e=e, e_evk=_lift(e2, top))


def secret_at(keys: CKKSKeys, level: int) -> RingElement:
    return _reduce(keys.s, keys.params.ring(level))


def encrypt(m: Sequence[int], keys: CKKSKeys, rng: RngStream, level: Optional[int] = None,
            scale=None) -> CKKSCiphertext:
    """c = (v pk0 + m + e0, v pk1 + e1) mod q_level for an encoded polynomial m."""
    params = keys.params
    level = params.L if level is None else level
    ring = params.ring(level)
    if len(m) != params.n:
        raise MessageError(f"encoded plaintexts have {params.n} coefficients, got {len(m)}")
    v = _zero_one_half(ring, rng)
    e0, e1 = _gaussian(ring, params.sigma, rng), _gaussian(ring, params.sigma, rng)
    pk0, pk1 = _reduce(keys.pk[0], ring), _reduce(keys.pk[1], ring)
    plain = RingElement.from_ints(ring, m)
    return CKKSCiphertext(v * pk0 + plain + e0, v * pk1 + e1, level,
                          Fraction(params.delta if scale is None else scale))


def _check_level(ct: CKKSCiphertext, params: CKKSParams) -> None:
    q = params.q_level(ct.level)
    if ct.c0.ctx.coeff_modulus != q or ct.c1.ctx.coeff_modulus != q:
        raise LevelMismatch(f"ciphertext components are not reduced modulo q_{ct.level}")


def decrypt(ct: CKKSCiphertext, keys: CKKSKeys) -> List[int]:
    """Centered coefficients of c0 + c1 s mod q_level."""
    _check_level(ct, keys.params)
    return (ct.c0 + ct.c1 * secret_at(keys, ct.level)).centered()


def decrypt_vector(ct: CKKSCiphertext, keys: CKKSKeys) -> List[complex]:
    return decode(decrypt(ct, keys), ct.scale, keys.params.n)


def encrypt_vector(z: Sequence[complex], keys: CKKSKeys, rng: RngStream, level: Optional[int] = None) -> CKKSCiphertext:
    return encrypt(encode(z, keys.params.delta, keys.params.n), keys, rng, level=level)


def decrypt_with_report(ct: CKKSCiphertext, keys: CKKSKeys):
    """Decrypted polynomial with its headroom below q_level / 2."""
    values = decrypt(ct, keys)
    observed = max((abs(v) for v in values), default=0)
    bound = keys.params.q_level(ct.level) / 2
    report = NoiseReport(SchemeId.CKKS, observed=float(observed), bound=bound, correct=observed < bound)
    return values, report


def _same_level(ct1: CKKSCiphertext, ct2: CKKSCiphertext) -> None:
    if ct1.level != ct2.level:
        raise LevelMismatch(f"levels {ct1.level} and {ct2.level} differ")
    if ct1.scale != ct2.scale:
        raise LevelMismatch(f"scales {ct1.scale} and {ct2.scale} differ")


def eval_add(ct1: CKKSCiphertext, ct2: CKKSCiphertext) -> CKKSCiphertext:
    _same_level(ct1, ct2)
    return CKKSCiphertext(ct1.c0 + ct2.c0, ct1.c1 + ct2.c1, ct1.level, ct1.scale)


def tensor(ct1: CKKSCiphertext, ct2: CKKSCiphertext) -> Tuple[RingElement, RingElement, RingElement]:
    """(b1 b2, a1 b2 + a2 b1, a1 a2) mod q_level."""
    _same_level(ct1, ct2)
    b1, a1, b2, a2 = ct1.c0, ct1.c1, ct2.c0, ct2.c1
    return b1 * b2, a1 * b2 + a2 * b1, a1 * a2


def eval_mult(ct1: CKKSCiphertext, ct2: CKKSCiphertext, keys: CKKSKeys) -> CKKSCiphertext:
    """Tensor, then fold d2 back with round(d2 evk / P); the scale multiplies."""
    params = keys.params
    d0, d1, d2 = tensor(ct1, ct2)
    ring = d0.ctx
    folded = []
    for part in keys.evk:
        product = negacyclic_convolve(d2.centered(), part.centered())
        folded.append(RingElement.from_ints(ring, (round_div(c, params.P) for c in product)))
    return CKKSCiphertext(d0 + folded[0], d1 + folded[1], ct1.level, ct1.scale * ct2.scale)


def rescale(ct: CKKSCiphertext, target: int, params: CKKSParams) -> CKKSCiphertext:
    """c' = round(q_target / q_level * c) at level target; the scale drops by p^(level - target)."""
    if target < 0:
        raise LevelExhausted(f"cannot rescale below level 0 (asked for {target})")
    if target >= ct.level:
        raise ParameterError(f"rescale target {target} must be below the current level {ct.level}")
    _check_level(ct, params)
    factor = params.p ** (ct.level - target)
    ring = params.ring(target)
    parts = [RingElement.from_ints(ring, (round_div(c, factor) for c in x.centered())) for x in (ct.c0, ct.c1)]
    return CKKSCiphertext(parts[0], parts[1], target, ct.scale / factor)


# ---------------------------------------------------------------------------
# Envelope adapter
# ---------------------------------------------------------------------------


class CKKSAdapter(SchemeAdapter):
    scheme = SchemeId.CKKS
    supported_ops = frozenset({"add", "mult", "rescale"})

    def build_keys(self, params, rng):
        return keygen(CKKSParams.from_dict(params), rng)

    def public_sections(self, keys):
        return {
            "pk": pack_bigints([*keys.pk[0].coeffs, *keys.pk[1].coeffs]),
            "evk": pack_bigints([*keys.evk[0].coeffs, *keys.evk[1].coeffs]),
        }

    def parse_message(self, obj, keys):
        try:
            values = [complex(float(re), float(im)) for re, im in obj]
        except (TypeError, ValueError) as exc:
            raise MessageError(f"ckks messages are lists of [re, im] pairs: {exc}") from exc
        return _check_slots(values, keys.params.n)

    def format_message(self, message):
        return [[complex(v).real, complex(v).imag] for v in message]

    def random_message(self, rng, keys):
        return [complex(2 * rng.random() - 1, 2 * rng.random() - 1) / 2 for _ in range(keys.params.slots)]

    def messages_match(self, got, want, keys):
        return within_tolerance(got, want)

    def expected(self, op, messages, keys):
        if op == "add":
            return [a + b for a, b in zip(*messages)]
        if op == "mult":
            return [a * b for a, b in zip(*messages)]
        if op == "rescale":
            return list(messages[0])
        return super().expected(op, messages, keys)

    def _ciphertext(self, envelope, keys) -> CKKSCiphertext:
        params = keys.params
        n = params.n
        if envelope.level > params.L:
            raise Corrupt(f"level {envelope.level} above the chain top {params.L}")
        values = unpack_bigints(envelope.payload)
        q = params.q_level(envelope.level)
        if len(values) != 2 * n + 2 or values[1] <= 0 or values[0] <= 0:
            raise Corrupt(f"ckks payload needs a scale and {2 * n} coefficients")
        coeffs = values[2:]
        if any(not 0 <= c < q for c in coeffs):
            raise Corrupt("ckks coefficient outside [0, q_level)")
        ring = params.ring(envelope.level)
        return CKKSCiphertext(RingElement(ring, tuple(coeffs[:n])), RingElement(ring, tuple(coeffs[n:])),
                              envelope.level, Fraction(values[0], values[1]))

    def _envelope(self, ct: CKKSCiphertext) -> CiphertextEnvelope:
        payload = pack_bigints([ct.scale.numerator, ct.scale.denominator, *ct.c0.coeffs, *ct.c1.coeffs])
        return CiphertextEnvelope(self.scheme, payload, level=ct.level)

    def encrypt_envelope(self, message, keys, rng):
        return self._envelope(encrypt_vector(message, keys, rng))

    def decrypt_envelope(self, envelope, keys):
        return decrypt_vector(self._ciphertext(envelope, keys), keys)

    def evaluate(self, op, envelopes, keys, operand=None):
        cts = [self._ciphertext(e, keys) for e in envelopes]
        if op == "add":
            out = eval_add(*cts)
        elif op == "mult":
            out = eval_mult(*cts, keys)
        else:
            target = cts[0].level - 1 if operand is None else int(operand)
            out = rescale(cts[0], target, keys.params)
        return self._envelope(out)
