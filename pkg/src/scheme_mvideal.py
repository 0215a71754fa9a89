"""Symmetric bit encryption from evaluations of a multivariate polynomial ideal.

A ciphertext is m p 1 + G f + (0, e) where G evaluates every monomial of
degree <= r at n secret points and f runs over the degree-bounded part of an
ideal I. The last n - alpha points lie on the zero set of I, so every
evaluation of an element of I (of any degree) is zero there and the secret
s = (0, s_2) annihilates it. Products stay decryptable for that reason.
"""

import logging
from dataclasses import dataclass
from math import comb
from typing import Any, Dict, List, Optional, Sequence, Tuple

import galois
import numpy as np
from sympy import prevprime

from src.algebra import (
    as_ints,
    centered,
    evaluate_monomials,
    monomial_exponents,
    round_div,
    row_space_basis,
    solve_linear,
)
from src.config import MAX_KEYGEN_RETRIES, MAX_SAMPLE_RETRIES, MVIDEAL_HEADROOM
from src.exceptions import Corrupt, Inconsistent, MessageError, ParameterError, RetriesExhausted
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


@dataclass(frozen=True)
class MVIdealParams:
    q: int
    l: int
    r: int
    n: int
    p: int
    sigma: float = 1.0
    generators: int = 1

    def __post_init__(self):
        if not galois.is_prime(self.q):
            raise ParameterError(f"q={self.q} must be prime")
        if self.l < 1 or self.r < 1:
            raise ParameterError("l and r must be positive")
        if not 1 <= self.generators < self.l:
            raise ParameterError(f"need 1 <= generators < l so the zero set is not a point, got {self.generators}")
        if not 1 <= self.n <= self.N:
            raise ParameterError(f"n={self.n} must lie in [1, N={self.N}]")
        if self.n >= self.q:
            raise ParameterError("ciphertext length must stay below q")
        if not 1 <= self.p < self.q:
            raise ParameterError(f"p={self.p} must lie in [1, q)")
        if self.p * MVIDEAL_HEADROOM >= self.q // 2:
            raise ParameterError(f"p={self.p} leaves no room below floor(q/2)")
        if self.sigma < 0:
            raise ParameterError("sigma must be non-negative")

    @property
    def N(self) -> int:
        """Number of monomials of degree <= r in l variables."""
        return comb(self.l + self.r, self.l)

    @classmethod
    def from_dict(cls, params: Dict[str, Any]) -> "MVIdealParams":
        if "q" in params:
            q = int(params["q"])
        else:
            q = int(prevprime(2 ** int(params["q_bits"])))
        return cls(q=q, l=int(params["l"]), r=int(params["r"]), n=int(params["n"]), p=int(params["p"]),
                   sigma=float(params.get("sigma", 1.0)), generators=int(params.get("generators", 1)))


@dataclass(frozen=True, eq=False)
class MVIdealKey:
    params: MVIdealParams
    generators: Any  # generators x N coefficient rows (degree <= 1)
    ideal_basis: Any  # alpha x N coefficient rows spanning I_{<=r}
    points: Any  # n x l
    G: Any  # n x N
    s: Any

    @property
    def field(self):
        return type(self.G)

    @property
    def alpha(self) -> int:
        return int(self.ideal_basis.shape[0])

    @property
    def s2(self):
        return self.s[self.alpha:]

    @property
    def sigma_s(self) -> int:
        return int(np.sum(as_ints(self.s)))

    @property
    def scale(self) -> int:
        """sigma_s * p, the decryption unit."""
        return self.sigma_s * self.params.p

    @property
    def p_inverse(self) -> int:
        return pow(self.params.p, -1, self.params.q)


def _multiply_by_monomial(row: Sequence[int], shift: Tuple[int, ...],
                          index: Dict[Tuple[int, ...], int]) -> Optional[List[int]]:
    out = [0] * len(index)
    for exps, j in index.items():
        c = int(row[j])
        if not c:
            continue
        target = tuple(a + b for a, b in zip(exps, shift))
        if target not in index:
            return None
        out[index[target]] = c
    return out


def bounded_ideal_basis(generators, params: MVIdealParams):
    """Row-reduced basis of I_{<=r}: generator multiples by monomials, degree capped at r."""
    field = type(generators)
    exponents = monomial_exponents(params.l, params.r)
    index = {e: j for j, e in enumerate(exponents)}
    rows = []
    for g in as_ints(generators):
        degree = max(sum(exponents[j]) for j in np.flatnonzero(g))
        for shift in monomial_exponents(params.l, params.r - degree):
            product = _multiply_by_monomial(g, shift, index)
            if product is not None:
                rows.append(product)
    return row_space_basis(field(np.asarray(rows, dtype=np.int64)))


def _random_generators(params: MVIdealParams, rng: RngStream, field):
    """Affine forms a_0 + a . x with linearly independent linear parts."""
    N = params.N
    for _ in range(MAX_SAMPLE_RETRIES):
        gens = field.Zeros((params.generators, N))
        for i in range(params.generators):
            gens[i, : params.l + 1] = rng.field_elements(field, params.l + 1)
        linear = gens[:, 1: params.l + 1]
        if row_space_basis(linear).shape[0] == params.generators:
            return gens
    raise RetriesExhausted("could not sample independent generators")


def _zero_set(generators, params: MVIdealParams):
    linear = generators[:, 1: params.l + 1]
    try:
        return solve_linear(linear, -generators[:, 0], mode="basis")
    except Inconsistent as exc:
        raise ParameterError("generators have an empty zero set") from exc


def _sample_points(params: MVIdealParams, alpha: int, zero_set, rng: RngStream, field):
    free = [rng.field_elements(field, params.l) for _ in range(alpha)]
    on_variety = []
    for _ in range(params.n - alpha):
        weights = rng.field_elements(field, zero_set.dimension)
        on_variety.append(zero_set.particular + weights @ zero_set.basis)
    return field(np.stack([as_ints(p) for p in free + on_variety]))


def keygen(params: MVIdealParams, rng: RngStream) -> MVIdealKey:
    """Sample an ideal, evaluation points meeting both rank conditions and an orthogonal secret."""
    field = galois.GF(params.q)
    exponents = monomial_exponents(params.l, params.r)
    for attempt in range(MAX_KEYGEN_RETRIES):
        generators = _random_generators(params, rng, field)
        basis = bounded_ideal_basis(generators, params)
        alpha = basis.shape[0]
        if not alpha < params.n:
            raise ParameterError(f"alpha={alpha} must be below n={params.n}")
        zero_set = _zero_set(generators, params)
        points = _sample_points(params, alpha, zero_set, rng, field)
        if len({tuple(row) for row in as_ints(points).tolist()}) < params.n:
            logger.debug(f"mvideal keygen attempt {attempt}: repeated point")
            continue
        G = evaluate_monomials(points, exponents, field)
        if row_space_basis(G).shape[0] < params.n:
            logger.debug(f"mvideal keygen attempt {attempt}: evaluation map not surjective")
            continue
        head = G[:alpha] @ basis.T
        if row_space_basis(head).shape[0] < alpha:
            logger.debug(f"mvideal keygen attempt {attempt}: ideal evaluations do not fill F_q^alpha")
            continue
        if np.any(G[alpha:] @ basis.T != 0):
            raise ParameterError("points outside the zero set of the ideal")
        s = _sample_secret(params, alpha, field, rng)
        key = MVIdealKey(params=params, generators=generators, ideal_basis=basis, points=points, G=G, s=s)
        logger.info(f"mvideal keygen: q={params.q}, N={params.N}, alpha={alpha}, n={params.n}, "
                    f"sigma_s={key.sigma_s}")
        return key
    raise RetriesExhausted(f"no admissible evaluation points after {MAX_KEYGEN_RETRIES} attempts")


def _sample_secret(params: MVIdealParams, alpha: int, field, rng: RngStream):
    """s = (0, s_2) with binary s_2, resampled until sigma_s != 0 and the scale fits."""
    for _ in range(MAX_SAMPLE_RETRIES):
        s2 = rng.bits(params.n - alpha)
        sigma_s = sum(s2)
        if sigma_s and sigma_s * params.p * MVIDEAL_HEADROOM < params.q // 2:
            return field(np.asarray([0] * alpha + s2, dtype=np.int64))
    raise RetriesExhausted("could not sample a secret with nonzero sigma_s")


def _check_bit(m) -> int:
    if isinstance(m, bool) or m not in (0, 1):
        raise MessageError(f"mvideal encrypts single bits, got {m!r}")
    return int(m)


def encrypt(m: int, key: MVIdealKey, rng: RngStream, sigma: Optional[float] = None,
            noise: Optional[Sequence[int]] = None):
    """c = m p 1 + G f + (0, e); ``sigma`` or an explicit ``noise`` vector override the key's sampler."""
    m = _check_bit(m)
    field, params = key.field, key.params
    weights = rng.field_elements(field, key.alpha)
    f = weights @ key.ideal_basis
    if noise is None:
        sigma = params.sigma if sigma is None else sigma
        noise = [rng.discrete_gaussian(sigma) for _ in range(params.n - key.alpha)]
    if len(noise) != params.n - key.alpha:
        raise ParameterError(f"noise must have length {params.n - key.alpha}")
    e = field(np.asarray([0] * key.alpha + [int(x) % params.q for x in noise], dtype=np.int64))
    return field.Ones(params.n) * field(m * params.p) + key.G @ f + e


def inner_value(c, key: MVIdealKey) -> int:
    """Centered representative of <s, c> mod q."""
    return centered(int(key.s @ c), key.params.q)


def decrypt(c, key: MVIdealKey) -> int:
    return round_div(inner_value(c, key), key.scale) % 2


def decrypt_with_report(c, key: MVIdealKey):
    value = inner_value(c, key)
    level = round_div(value, key.scale)
    observed = abs(value - level * key.scale)
    bound = key.scale / 2
    report = NoiseReport(SchemeId.MVIDEAL, observed=float(observed), bound=bound, correct=observed < bound)
    return level % 2, report


def noise_vector(c, m: int, key: MVIdealKey) -> List[int]:
    """Recover e-bar from a ciphertext of a known bit (G f vanishes on the tail)."""
    tail = as_ints(c[key.alpha:])
    return [centered(int(v) - m * key.params.p, key.params.q) for v in tail]


def mult_residue(e1: Sequence[int], e2: Sequence[int], m1: int, m2: int, key: MVIdealKey) -> int:
    """<s_2, m_1 e_2 + m_2 e_1 + p^{-1} (e_1 . e_2)> mod q, centered."""
    q, p_inv = key.params.q, key.p_inverse
    s2 = as_ints(key.s2)
    total = sum(int(s) * (m1 * b + m2 * a + p_inv * a * b) for s, a, b in zip(s2, e1, e2))
    return centered(total, q)


def eval_add(c1, c2):
    return c1 + c2


def eval_mult(c1, c2, key: MVIdealKey):
    """Hadamard product scaled by p^{-1} mod q."""
    field = key.field
    return (c1 * c2) * field(key.p_inverse)


class MVIdealAdapter(SchemeAdapter):
    scheme = SchemeId.MVIDEAL
    supported_ops = frozenset({"add", "mult"})

    def build_keys(self, params, rng):
        return keygen(MVIdealParams.from_dict(params), rng)

    def parse_message(self, obj, keys):
        return _check_bit(obj)

    def format_message(self, message):
        return int(message)

    def random_message(self, rng, keys):
        return rng.randbelow(2)

    def expected(self, op, messages, keys):
        if op == "add":
            return (messages[0] + messages[1]) % 2
        if op == "mult":
            return messages[0] * messages[1]
        return super().expected(op, messages, keys)

    def _vector(self, envelope, keys):
        q = keys.params.q
        values = unpack_ints(envelope.payload, int_width(q), keys.params.n)
        if any(v >= q for v in values):
            raise Corrupt("mvideal ciphertext entry out of range")
        return keys.field(np.asarray(values, dtype=np.int64))

    def _envelope(self, c, keys):
        return CiphertextEnvelope(self.scheme, pack_ints(as_ints(c).tolist(), int_width(keys.params.q)))

    def encrypt_envelope(self, message, keys, rng):
        return self._envelope(encrypt(message, keys, rng), keys)

    def decrypt_envelope(self, envelope, keys):
        return decrypt(self._vector(envelope, keys), keys)

    def evaluate(self, op, envelopes, keys, operand=None):
        c1, c2 = (self._vector(e, keys) for e in envelopes)
        out = eval_add(c1, c2) if op == "add" else eval_mult(c1, c2, keys)
        return self._envelope(out, keys)
