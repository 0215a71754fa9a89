"""Symmetric scheme on integer polynomials with a prime secret and a refresh modulus.

c(x) = y(x) + S_k d(x) with y_i = m_i + 2 u_i. Decryption reduces every
coefficient into the centered range mod S_k and then mod 2, so the plaintext
ring is F_2[x]. Refresh reduces modulo R_k = z S_k, which keeps the residue
mod S_k intact while shrinking the coefficients.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from sympy import isprime, nextprime

from src.algebra import centered
from src.config import MAX_SAMPLE_RETRIES
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


@dataclass(frozen=True)
class IntPolyParams:
    ell: int
    a: int = 1
    degree: int = 3
    noise_bits: int = 8

    def __post_init__(self):
        if self.ell < 4:
            raise ParameterError(f"ell must be at least 4, got {self.ell}")
        if self.a < 1 or self.degree < 0 or self.noise_bits < 0:
            raise ParameterError("a must be >= 1; degree and noise_bits must be non-negative")
        if self.noise_bits + 1 >= self.ell - 2:
            raise ParameterError(f"noise_bits={self.noise_bits} leaves no room below S_k/2 at ell={self.ell}")

    @property
    def gamma(self) -> int:
        """Bit length of z: ceil(log2 ell)."""
        return math.ceil(math.log2(self.ell))

    @property
    def d_bits(self) -> int:
        return self.ell ** self.a

    @classmethod
    def from_dict(cls, params: Dict[str, Any]) -> "IntPolyParams":
        return cls(ell=int(params["ell"]), a=int(params.get("a", 1)), degree=int(params.get("degree", 3)),
                   noise_bits=int(params.get("noise_bits", 8)))


@dataclass(frozen=True)
class IntPolyKey:
    params: IntPolyParams
    S_k: int
    z: int

    def __post_init__(self):
        if not isprime(self.S_k):
            raise ParameterError(f"S_k={self.S_k} is not prime")
        if self.z < 2:
            raise ParameterError(f"z must be at least 2, got {self.z}")

    @property
    def R_k(self) -> int:
        return self.z * self.S_k

    @property
    def fresh_bound(self) -> int:
        """Largest |y_i| a fresh ciphertext can carry."""
        return 1 + 2 * (2 ** self.params.noise_bits - 1)


@dataclass(frozen=True)
class IntPolyCiphertext:
    """Coefficients (constant first) plus a tracked upper bound on max |y_i|."""

    coeffs: Tuple[int, ...]
    noise_bound: int

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


def keygen(params: IntPolyParams, rng: RngStream) -> IntPolyKey:
    """S_k: next prime above a random odd ell-bit integer; z: random gamma-bit integer >= 2."""
    top = 1 << (params.ell - 1)
    for _ in range(MAX_SAMPLE_RETRIES):
        candidate = top | rng.randbelow(top) | 1
        S_k = int(nextprime(candidate - 1))
        if S_k.bit_length() == params.ell:
            break
    else:
        raise RetriesExhausted(f"no {params.ell}-bit prime found")
    half = 1 << (params.gamma - 1)
    z = max(2, half | rng.randbelow(half))
    logger.info(f"intpoly keygen: ell={params.ell}, gamma={params.gamma}, S_k has {S_k.bit_length()} bits")
    return IntPolyKey(params=params, S_k=S_k, z=z)


def _check_bits(msg: Sequence[int]) -> List[int]:
    bits = [int(b) for b in msg]
    if not bits or any(b not in (0, 1) for b in bits):
        raise MessageError("messages are non-empty lists of bit coefficients")
    return bits


def encrypt(msg: Sequence[int], key: IntPolyKey, rng: RngStream,
            u: Optional[Sequence[int]] = None, d: Optional[Sequence[int]] = None) -> IntPolyCiphertext:
    """c = y + S_k d with y_i = m_i + 2 u_i and ell^a-bit coefficients in d.

    ``u`` and ``d`` override the sampled noise and mask polynomials.
    """
    bits = _check_bits(msg)
    length = len(bits)
    sampled = u is None
    if sampled:
        u = [rng.randbelow(2 ** key.params.noise_bits) for _ in range(length)]
    if d is None:
        d_top = 1 << (key.params.d_bits - 1)
        d = [d_top | rng.randbelow(d_top) for _ in range(length)]
    if len(u) != length or len(d) != length:
        raise ParameterError("noise and mask polynomials must match the message length")
    y = [m + 2 * int(ui) for m, ui in zip(bits, u)]
    coeffs = tuple(yi + key.S_k * int(di) for yi, di in zip(y, d))
    noise_bound = key.fresh_bound if sampled else max(abs(v) for v in y)
    return IntPolyCiphertext(coeffs, noise_bound=noise_bound)


def decrypt(ct: IntPolyCiphertext, key: IntPolyKey) -> List[int]:
    return [centered(c, key.S_k) % 2 for c in ct.coeffs]


def observed_noise(ct: IntPolyCiphertext, key: IntPolyKey) -> int:
    return max((abs(centered(c, key.S_k)) for c in ct.coeffs), default=0)


def decrypt_with_report(ct: IntPolyCiphertext, key: IntPolyKey):
    message = decrypt(ct, key)
    observed = observed_noise(ct, key)
    bound = key.S_k / 2
    report = NoiseReport(SchemeId.INTPOLY, observed=float(observed), bound=bound,
                         correct=ct.noise_bound < bound)
    return message, report


def refresh(ct: IntPolyCiphertext, key: IntPolyKey) -> IntPolyCiphertext:
    """Centered reduction of every coefficient mod R_k."""
    return IntPolyCiphertext(tuple(centered(c, key.R_k) for c in ct.coeffs), ct.noise_bound)


def _padded(a: Sequence[int], length: int) -> List[int]:
    return list(a) + [0] * (length - len(a))


def eval_add(ct1: IntPolyCiphertext, ct2: IntPolyCiphertext) -> IntPolyCiphertext:
    length = max(len(ct1.coeffs), len(ct2.coeffs))
    coeffs = tuple(x + y for x, y in zip(_padded(ct1.coeffs, length), _padded(ct2.coeffs, length)))
    return IntPolyCiphertext(coeffs, ct1.noise_bound + ct2.noise_bound)


def poly_mul(a: Sequence[int], b: Sequence[int]) -> List[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def eval_mult(ct1: IntPolyCiphertext, ct2: IntPolyCiphertext) -> IntPolyCiphertext:
    """Integer polynomial product; noise bound (min deg + 1) B1 B2."""
    bound = (min(ct1.degree, ct2.degree) + 1) * ct1.noise_bound * ct2.noise_bound
    return IntPolyCiphertext(tuple(poly_mul(ct1.coeffs, ct2.coeffs)), bound)


def carryless_product(m1: Sequence[int], m2: Sequence[int]) -> List[int]:
    """Product in F_2[x]."""
    return [c % 2 for c in poly_mul(m1, m2)]


def xor_sum(m1: Sequence[int], m2: Sequence[int]) -> List[int]:
    length = max(len(m1), len(m2))
    return [(x + y) % 2 for x, y in zip(_padded(m1, length), _padded(m2, length))]


class IntPolyAdapter(SchemeAdapter):
    scheme = SchemeId.INTPOLY
    supported_ops = frozenset({"add", "mult", "refresh"})

    def build_keys(self, params, rng):
        return keygen(IntPolyParams.from_dict(params), rng)

    def parse_message(self, obj, keys):
        if not isinstance(obj, list) or any(isinstance(b, bool) or b not in (0, 1) for b in obj) or not obj:
            raise MessageError(f"expected a non-empty list of bits, got {obj!r}")
        if len(obj) > keys.params.degree + 1:
            raise MessageError(f"messages have at most {keys.params.degree + 1} coefficients")
        return list(obj)

    def format_message(self, message):
        return [int(b) for b in message]

    def random_message(self, rng, keys):
        return rng.bits(keys.params.degree + 1)

    def expected(self, op, messages, keys):
        if op == "add":
            return xor_sum(*messages)
        if op == "mult":
            return carryless_product(*messages)
        if op == "refresh":
            return list(messages[0])
        return super().expected(op, messages, keys)

    def _ciphertext(self, envelope, keys) -> IntPolyCiphertext:
        values = unpack_bigints(envelope.payload)
        if len(values) < 2:
            raise Corrupt("intpoly payload needs a noise bound and at least one coefficient")
        return IntPolyCiphertext(tuple(values[1:]), noise_bound=values[0])

    def _envelope(self, ct: IntPolyCiphertext) -> CiphertextEnvelope:
        return CiphertextEnvelope(self.scheme, pack_bigints([ct.noise_bound, *ct.coeffs]))

    def encrypt_envelope(self, message, keys, rng):
        return self._envelope(encrypt(message, keys, rng))

    def decrypt_envelope(self, envelope, keys):
        return decrypt(self._ciphertext(envelope, keys), keys)

    def evaluate(self, op, envelopes, keys, operand=None):
        cts = [self._ciphertext(e, keys) for e in envelopes]
        if op == "add":
            out = eval_add(*cts)
        elif op == "mult":
            out = eval_mult(*cts)
        else:
            out = refresh(cts[0], keys)
        return self._envelope(out)
