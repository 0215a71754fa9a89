"""Linear codes: binary and q-ary Reed-Muller, Reed decoding, interpolation, s-ideal codes."""

import logging
from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import List, Optional, Sequence, Tuple

import galois
import numpy as np

from src.algebra import (
    RingCtx,
    as_ints,
    evaluate_monomials,
    ideal_matrix,
    monomial_exponents,
    null_space,
    row_space_basis,
    solve_linear,
)
from src.exceptions import AmbiguousAtY, DecodeAmbiguous, DecodeFailure, ParameterError

logger = logging.getLogger(__name__)

GF2 = galois.GF(2)


def hamming_weight(v) -> int:
    return int(np.count_nonzero(as_ints(v)))


def hamming_distance(u, v) -> int:
    return int(np.count_nonzero(as_ints(u) != as_ints(v)))


def support(v) -> Tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(as_ints(v)))


@dataclass(frozen=True, eq=False)
class LinearCode:
    """[n, k, d] code given by a full-row-rank generator matrix."""

    G: "galois.FieldArray"
    d: Optional[int] = None

    def __post_init__(self):
        if self.G.ndim != 2:
            raise ParameterError("generator matrix must be 2-D")
        if self.G.shape[0] and np.linalg.matrix_rank(self.G) != self.G.shape[0]:
            raise ParameterError("generator matrix must have full row rank")

    @property
    def k(self) -> int:
        return int(self.G.shape[0])

    @property
    def n(self) -> int:
        return int(self.G.shape[1])

    @cached_property
    def H(self):
        """(n - k) x n parity-check matrix with H G^T = 0."""
        return null_space(self.G)

    def encode(self, message):
        return message @ self.G

    def contains(self, word) -> bool:
        if self.H.shape[0] == 0:
            return True
        return bool(np.all(self.H @ word == 0))


# ---------------------------------------------------------------------------
# Binary Reed-Muller
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BinaryRM:
    """RM(r, m): evaluations of multilinear monomials of degree <= r on F_2^m."""

    r: int
    m: int
    code: LinearCode
    points: np.ndarray
    monomials: Tuple[Tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return 2 ** self.m

    @property
    def k(self) -> int:
        return self.code.k

    @property
    def d(self) -> int:
        return 2 ** (self.m - self.r)

    @property
    def G(self):
        return self.code.G

    def describe(self) -> dict:
        return {"family": "binary-rm", "params": {"r": self.r, "m": self.m}}


def build_binary_rm(r: int, m: int) -> BinaryRM:
    """RM(r, m) with point a_j = bits of j - 1 (least significant bit = x_1)."""
    if m < 1 or not 0 <= r <= m:
        raise ParameterError(f"need 0 <= r <= m and m >= 1, got r={r}, m={m}")
    n = 2 ** m
    points = (np.arange(n)[:, None] >> np.arange(m)) & 1
    monomials = []
    for exps in monomial_exponents(m, r, multilinear=True):
        monomials.append(tuple(var for var, e in enumerate(exps) if e))
    rows = np.ones((len(monomials), n), dtype=np.int64)
    for i, variables in enumerate(monomials):
        for var in variables:
            rows[i] *= points[:, var]
    code = LinearCode(GF2(rows), d=2 ** (m - r))
    expected_k = sum(comb(m, i) for i in range(r + 1))
    assert code.k == expected_k
    return BinaryRM(r=r, m=m, code=code, points=points, monomials=tuple(monomials))


def reed_decode(w, rm: BinaryRM):
    """Majority-logic decoding of w, peeling monomial layers from degree r down to 0.

    Returns the message p with p G within distance < d/2 of w. A tied vote
    raises DecodeAmbiguous; a residual error of weight >= d/2 raises DecodeFailure.
    """
    word = as_ints(w) % 2
    if word.size != rm.n:
        raise ParameterError(f"word length {word.size} does not match n={rm.n}")
    rows = as_ints(rm.G)
    residual = word.copy()
    message = np.zeros(rm.k, dtype=np.int64)

    for degree in range(rm.r, -1, -1):
        layer = [i for i, mono in enumerate(rm.monomials) if len(mono) == degree]
        for idx in layer:
            fixed = [v for v in range(rm.m) if v not in rm.monomials[idx]]
            coset = rm.points[:, fixed] @ (1 << np.arange(len(fixed), dtype=np.int64))
            votes = np.bincount(coset, weights=residual, minlength=2 ** len(fixed)).astype(np.int64) % 2
            ones = int(votes.sum())
            zeros = votes.size - ones
            if ones == zeros:
                raise DecodeAmbiguous(f"tied vote ({ones}:{zeros}) for monomial {rm.monomials[idx]}")
            message[idx] = int(ones > zeros)
        for idx in layer:
            if message[idx]:
                residual = (residual + rows[idx]) % 2

    if 2 * int(residual.sum()) >= rm.d:
        raise DecodeFailure(f"residual weight {int(residual.sum())} is outside radius d/2={rm.d / 2}")
    return GF2(message)


# ---------------------------------------------------------------------------
# q-ary (punctured) Reed-Muller evaluation codes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QaryRM:
    """Punctured RM_q(t, rho): polynomials in t variables evaluated at n support points.

    ``evaluations`` is the n x K matrix of all K monomials of the function
    space at the support; ``code`` is its column space as a LinearCode.
    """

    q: int
    t: int
    rho: int
    support: np.ndarray
    exponents: Tuple[Tuple[int, ...], ...]
    evaluations: "galois.FieldArray"
    code: LinearCode
    strict_degree: bool = False

    @property
    def n(self) -> int:
        return int(self.support.shape[0])

    @property
    def function_dim(self) -> int:
        return len(self.exponents)

    @property
    def field(self):
        return type(self.evaluations)

    def evaluate_at(self, point) -> "galois.FieldArray":
        """Monomial values at one point (length K)."""
        return evaluate_monomials(np.asarray(point).reshape(1, -1), self.exponents, self.field)[0]

    def encode_function(self, coeffs) -> "galois.FieldArray":
        return self.evaluations @ coeffs

    def describe(self) -> dict:
        return {"family": "qary-rm", "params": {"q": self.q, "t": self.t, "rho": self.rho,
                                                "strict_degree": self.strict_degree}}


def qary_function_dim(t: int, rho: int, strict_degree: bool = False) -> int:
    """C(t + rho, t) for deg <= rho; C(t + rho - 1, t) for deg < rho."""
    return comb(t + rho - 1, t) if strict_degree else comb(t + rho, t)


def build_qary_rm(q: int, t: int, rho: int, support, strict_degree: bool = False) -> QaryRM:
    """Evaluation code of polynomials of degree <= rho (or < rho) on the given support."""
    if not galois.is_prime_power(q):
        raise ParameterError(f"q must be a prime power, got {q}")
    if rho >= q:
        raise ParameterError(f"order rho={rho} must be below q={q}")
    points = np.asarray(support, dtype=np.int64).reshape(-1, t)
    if points.shape[0] < 1 or points.shape[0] > q ** t:
        raise ParameterError(f"support size must lie in [1, q^t], got {points.shape[0]}")
    if np.any(points < 0) or np.any(points >= q):
        raise ParameterError("support coordinates must lie in [0, q)")
    if len({tuple(p) for p in points.tolist()}) != points.shape[0]:
        raise ParameterError("support points must be distinct")
    field = galois.GF(q)
    max_degree = rho - 1 if strict_degree else rho
    exponents = tuple(monomial_exponents(t, max_degree))
    evaluations = evaluate_monomials(points, exponents, field)
    code = LinearCode(row_space_basis(evaluations.T))
    return QaryRM(q=q, t=t, rho=rho, support=points, exponents=exponents,
                  evaluations=evaluations, code=code, strict_degree=strict_degree)


def interpolate_eval(values, positions: Sequence[int], evaluations, at_y):
    """Value at y of the function p with p(x_i) = values_i for i in positions.

    Raises Inconsistent when no such p exists in the space and AmbiguousAtY when
    p(y) differs between solutions.
    """
    if len(positions) < 1:
        raise ParameterError("need at least one position")
    index = list(positions)
    space = solve_linear(evaluations[index, :], values[index], mode="basis")
    if space.dimension and np.any(space.basis @ at_y != 0):
        raise AmbiguousAtY("p(y) is not determined by the given positions")
    return space.particular @ at_y


def special_zero_codeword(rm: QaryRM, y) -> "galois.FieldArray":
    """Everywhere-nonzero codeword of the order-rho code whose function vanishes at y.

    Uses p = x_1 - y_1, nonzero at every support point whose first coordinate
    differs from y_1.
    """
    if rm.rho < (2 if rm.strict_degree else 1):
        raise ParameterError("special zero encoding needs linear functions in the space")
    field = rm.field
    coeffs = field.Zeros(rm.function_dim)
    coeffs[0] = -field(int(y[0]))
    coeffs[1] = 1
    word = rm.encode_function(coeffs)
    if np.any(word == 0) or rm.evaluate_at(y) @ coeffs != 0:
        raise ParameterError("no special encoding of zero: some x_1 coordinate equals y_1")
    return word


def hadamard_closure_holds(small: QaryRM, big: QaryRM, factors: int, codewords) -> bool:
    """Check that products of ``factors`` codewords of ``small`` lie in ``big``."""
    product = codewords[0]
    for word in codewords[1:factors]:
        product = product * word
    return big.code.contains(product)


# ---------------------------------------------------------------------------
# s-ideal codes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IdealCode:
    """[sn, n] code with generator (I_n | IM_f(g_1) | ... | IM_f(g_{s-1}))."""

    gens: Tuple["galois.FieldArray", ...]
    ring: RingCtx
    G: "galois.FieldArray"
    H: "galois.FieldArray"

    @property
    def s(self) -> int:
        return len(self.gens) + 1


def build_ideal_code(gens: Sequence, ring: RingCtx) -> IdealCode:
    if not gens:
        raise ParameterError("an s-ideal code needs at least one generator")
    n = ring.n
    field = type(gens[0])
    if any(len(g) != n for g in gens):
        raise ParameterError(f"all generators must have length {n}")
    blocks = [ideal_matrix(g, ring) for g in gens]
    right = field(np.hstack([as_ints(b) for b in blocks]))
    G = field(np.hstack([as_ints(field.Identity(n)), as_ints(right)]))
    H = field(np.hstack([as_ints(-right.T), as_ints(field.Identity(n * len(gens)))]))
    if np.any(H @ G.T != 0):
        raise ParameterError("parity check does not annihilate the generator")
    return IdealCode(gens=tuple(gens), ring=ring, G=G, H=H)


def enumerate_codewords(code: LinearCode) -> np.ndarray:
    """All q^k codewords as an integer array (small codes only)."""
    field = type(code.G)
    q = field.order
    k = code.k
    messages = np.array(np.unravel_index(np.arange(q ** k), (q,) * k)).T if k else np.zeros((1, 0), dtype=np.int64)
    return as_ints(field(messages) @ code.G)


def minimum_distance(code: LinearCode) -> int:
    words = enumerate_codewords(code)
    weights = np.count_nonzero(words, axis=1)
    nonzero = weights[weights > 0]
    return int(nonzero.min()) if nonzero.size else 0

