"""Finite fields, extension-field vectors, ideal rings and negacyclic rings.

Field arithmetic and field linear algebra go through ``galois``; vectors over
F_q or F_{q^m} are plain 1-D galois ``FieldArray`` objects whose field class is
fixed by a :class:`FieldCtx`. Integer rings Z_q[x]/(x^n+1) use Python ints so
that products never overflow before a rounding step.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import galois
import numpy as np

from src.exceptions import Inconsistent, ParameterError

logger = logging.getLogger(__name__)


def as_ints(array) -> np.ndarray:
    """Integer representation of a FieldArray (or any int-like array)."""
    if isinstance(array, galois.FieldArray):
        return np.asarray(array.view(np.ndarray), dtype=np.int64)
    return np.asarray(array, dtype=np.int64)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldCtx:
    """F_q (m = 1) or F_{q^m} with an explicit monic irreducible modulus.

    ``modulus_poly`` stores ascending coefficients (constant first), length
    m + 1. When it is omitted for m > 1 the lexicographically first
    irreducible polynomial is used.
    """

    q: int
    m: int = 1
    modulus_poly: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not galois.is_prime(self.q):
            raise ParameterError(f"field characteristic must be prime, got q={self.q}")
        if self.m < 1:
            raise ParameterError(f"extension degree must be >= 1, got m={self.m}")
        if self.m == 1:
            if self.modulus_poly is not None:
                raise ParameterError("prime fields take no modulus polynomial")
            return
        if self.modulus_poly is None:
            poly = galois.irreducible_poly(self.q, self.m)
            coeffs = tuple(int(c) for c in reversed(poly.coeffs))
            object.__setattr__(self, "modulus_poly", coeffs)
            return
        coeffs = tuple(int(c) for c in self.modulus_poly)
        if len(coeffs) != self.m + 1 or coeffs[-1] != 1:
            raise ParameterError(f"modulus_poly must be monic of degree {self.m}")
        if any(not 0 <= c < self.q for c in coeffs):
            raise ParameterError("modulus_poly coefficients must lie in [0, q)")
        # Rabin's test in galois is deterministic
        if not self._poly(coeffs).is_irreducible():
            raise ParameterError(f"modulus_poly {coeffs} is reducible over F_{self.q}")
        object.__setattr__(self, "modulus_poly", coeffs)

    def _poly(self, ascending: Sequence[int]) -> galois.Poly:
        return galois.Poly(list(reversed(ascending)), field=galois.GF(self.q))

    @property
    def order(self) -> int:
        return self.q ** self.m

    @cached_property
    def prime_gf(self):
        return galois.GF(self.q)

    @cached_property
    def gf(self):
        if self.m == 1:
            return self.prime_gf
        return galois.GF(self.q ** self.m, irreducible_poly=self._poly(self.modulus_poly))

    def alpha(self):
        """The power-basis generator (root of the modulus)."""
        if self.m == 1:
            raise ParameterError("prime fields have no extension generator")
        return self.gf(self.q)

    def zeros(self, n: int):
        return self.gf.Zeros(n)

    def embed(self, values) -> "galois.FieldArray":
        """Lift F_q values into this field (identity for prime fields)."""
        return self.gf(as_ints(values) % self.q)

    def describe(self) -> dict:
        return {"q": self.q, "m": self.m, "modulus_poly": list(self.modulus_poly or [])}

    def check(self, x) -> None:
        """Raise ParameterError when x does not belong to this field."""
        cls = type(x)
        if not isinstance(x, galois.FieldArray) or cls.characteristic != self.q or cls.degree != self.m:
            raise ParameterError(f"element is not in F_{self.q}^{self.m}")
        if self.m > 1 and cls.irreducible_poly != self.gf.irreducible_poly:
            raise ParameterError("element uses a different field modulus")


def vec(x, ctx: FieldCtx) -> "galois.FieldArray":
    """Power-basis coordinates of x over F_q, shape x.shape + (m,)."""
    ctx.check(x)
    ints = as_ints(x)
    powers = ctx.q ** np.arange(ctx.m, dtype=np.int64)
    digits = (ints[..., None] // powers) % ctx.q
    return ctx.prime_gf(digits)


def unvec(coords, ctx: FieldCtx) -> "galois.FieldArray":
    """Inverse of :func:`vec`: rebuild field elements from F_q coordinates."""
    digits = as_ints(coords)
    if digits.shape[-1] != ctx.m:
        raise ParameterError(f"expected {ctx.m} coordinates, got {digits.shape[-1]}")
    powers = ctx.q ** np.arange(ctx.m, dtype=np.int64)
    return ctx.gf((digits * powers).sum(axis=-1))


def mat(v, ctx: FieldCtx) -> "galois.FieldArray":
    """m x n matrix whose i-th column is vec(v_i)."""
    return vec(v, ctx).T


def rank_weight(v, ctx: FieldCtx) -> int:
    """Rank weight rw(v) = rank(MAT(v))."""
    if len(v) == 0:
        return 0
    return int(np.linalg.matrix_rank(mat(v, ctx)))


def span_basis(elements, ctx: FieldCtx) -> "galois.FieldArray":
    """Basis of the F_q-span of the given field elements, as field elements."""
    if len(elements) == 0:
        return ctx.gf.Zeros(0)
    reduced = vec(elements, ctx).row_reduce()
    rows = [row for row in reduced if np.any(row != 0)]
    if not rows:
        return ctx.gf.Zeros(0)
    return unvec(ctx.prime_gf(np.stack([as_ints(r) for r in rows])), ctx)


def in_span(element, basis, ctx: FieldCtx) -> bool:
    """True when element lies in the F_q-span of basis."""
    if len(basis) == 0:
        return bool(element == 0)
    base_rank = rank_weight(basis, ctx)
    joined = ctx.gf(np.append(as_ints(basis), int(element)))
    return rank_weight(joined, ctx) == base_rank


# ---------------------------------------------------------------------------
# Rings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RingCtx:
    """Z_q[x]/(x^n+1) (``degree`` set) or F_q[X]/<f_n> (``ring_poly`` set).

    ``ring_poly`` holds ascending coefficients of a monic f_n.
    """

    coeff_modulus: int
    degree: Optional[int] = None
    ring_poly: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.coeff_modulus < 2:
            raise ParameterError(f"coefficient modulus must be >= 2, got {self.coeff_modulus}")
        if (self.degree is None) == (self.ring_poly is None):
            raise ParameterError("set exactly one of degree (negacyclic) or ring_poly")
        if self.degree is not None:
            if self.degree < 1 or self.degree & (self.degree - 1):
                raise ParameterError(f"negacyclic degree must be a power of 2, got {self.degree}")
            return
        coeffs = tuple(int(c) for c in self.ring_poly)
        if len(coeffs) < 2 or coeffs[-1] != 1:
            raise ParameterError("ring_poly must be monic of degree >= 1")
        if any(not 0 <= c < self.coeff_modulus for c in coeffs):
            raise ParameterError("ring_poly coefficients must lie in [0, q)")
        object.__setattr__(self, "ring_poly", coeffs)

    @property
    def n(self) -> int:
        return self.degree if self.degree is not None else len(self.ring_poly) - 1

    @property
    def negacyclic(self) -> bool:
        return self.degree is not None

    @property
    def modulus_coeffs(self) -> Tuple[int, ...]:
        """Ascending coefficients of the ring modulus, x^n + 1 in the negacyclic case."""
        if self.negacyclic:
            return (1,) + (0,) * (self.degree - 1) + (1,)
        return self.ring_poly

    def describe(self) -> dict:
        if self.negacyclic:
            return {"q": self.coeff_modulus, "n": self.degree}
        return {"q": self.coeff_modulus, "ring_poly": list(self.ring_poly)}


def negacyclic_convolve(a: Sequence[int], b: Sequence[int]) -> List[int]:
    """Exact integer product modulo x^n + 1 (no coefficient reduction)."""
    n = len(a)
    if len(b) != n:
        raise ParameterError("operands must have equal length")
    out = [0] * n
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            k = i + j
            if k < n:
                out[k] += ai * bj
            else:
                out[k - n] -= ai * bj
    return out


def polymod_convolve(a: Sequence[int], b: Sequence[int], modulus: Sequence[int]) -> List[int]:
    """Exact integer product modulo a monic polynomial (ascending coefficients)."""
    n = len(modulus) - 1
    full = [0] * (2 * n - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            full[i + j] += ai * bj
    for k in range(len(full) - 1, n - 1, -1):
        c = full[k]
        if c:
            for j in range(n):
                full[k - n + j] -= c * modulus[j]
        full[k] = 0
    return full[:n]


def centered(value: int, modulus: int) -> int:
    """Representative of value mod modulus in (-modulus/2, modulus/2]."""
    r = value % modulus
    return r - modulus if 2 * r > modulus else r


def round_div(value: int, divisor: int) -> int:
    """Nearest integer to value / divisor for positive divisor, ties rounded up. Exact on ints."""
    return (2 * value + divisor) // (2 * divisor)


@dataclass(frozen=True)
class RingElement:
    """Residue in a :class:`RingCtx`, coefficients canonical in [0, q)."""

    ctx: RingCtx
    coeffs: Tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.ctx.n:
            raise ParameterError(f"expected {self.ctx.n} coefficients, got {len(self.coeffs)}")
        q = self.ctx.coeff_modulus
        if any(not 0 <= c < q for c in self.coeffs):
            raise ParameterError("coefficients must be reduced into [0, q)")

    @classmethod
    def from_ints(cls, ctx: RingCtx, values: Iterable[int]) -> "RingElement":
        q = ctx.coeff_modulus
        return cls(ctx, tuple(int(v) % q for v in values))

    @classmethod
    def zero(cls, ctx: RingCtx) -> "RingElement":
        return cls(ctx, (0,) * ctx.n)

    @classmethod
    def one(cls, ctx: RingCtx) -> "RingElement":
        return cls(ctx, (1,) + (0,) * (ctx.n - 1))

    def _check(self, other: "RingElement") -> None:
        if not isinstance(other, RingElement) or other.ctx != self.ctx:
            raise ParameterError("ring context mismatch")

    def __add__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement.from_ints(self.ctx, (a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement.from_ints(self.ctx, (a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "RingElement":
        return RingElement.from_ints(self.ctx, (-a for a in self.coeffs))

    def __mul__(self, other) -> "RingElement":
        if isinstance(other, int):
            return RingElement.from_ints(self.ctx, (a * other for a in self.coeffs))
        if self.ctx.negacyclic:
            return negacyclic_mul(self, other)
        self._check(other)
        product = polymod_convolve(self.coeffs, other.coeffs, self.ctx.ring_poly)
        return RingElement.from_ints(self.ctx, product)

    __rmul__ = __mul__

    def centered(self) -> List[int]:
        q = self.ctx.coeff_modulus
        return [centered(c, q) for c in self.coeffs]

    def infinity_norm(self) -> int:
        return max((abs(c) for c in self.centered()), default=0)


def negacyclic_mul(a: RingElement, b: RingElement) -> RingElement:
    """Product in Z_q[x]/(x^n+1)."""
    if not isinstance(b, RingElement) or a.ctx != b.ctx:
        raise ParameterError("ring context mismatch")
    if not a.ctx.negacyclic:
        raise ParameterError("negacyclic_mul needs a negacyclic ring")
    return RingElement.from_ints(a.ctx, negacyclic_convolve(a.coeffs, b.coeffs))


# ---------------------------------------------------------------------------
# Vector product and ideal matrices over F_q / F_{q^m}
# ---------------------------------------------------------------------------


def _modulus_low(ring: RingCtx, field) -> "galois.FieldArray":
    if ring.coeff_modulus != field.characteristic:
        raise ParameterError("ring modulus and field characteristic differ")
    return field(np.asarray(ring.modulus_coeffs[:-1], dtype=np.int64))


def _reduce(full, ring: RingCtx):
    field = type(full)
    n = ring.n
    low = _modulus_low(ring, field)
    coeffs = full.copy()
    for k in range(len(coeffs) - 1, n - 1, -1):
        c = coeffs[k]
        if c != 0:
            coeffs[k - n:k] = coeffs[k - n:k] - c * low
    return coeffs[:n]


def vector_product(u, v, ring: RingCtx):
    """u . v = poly^-1(poly(u) poly(v) mod f_n), with poly(u) = sum u_i X^(i-1)."""
    n = ring.n
    if len(u) != n or len(v) != n:
        raise ParameterError(f"vector_product needs length {n}, got {len(u)} and {len(v)}")
    field = type(u)
    full = field.Zeros(2 * n - 1)
    for i in range(n):
        if u[i] != 0:
            full[i:i + n] = full[i:i + n] + u[i] * v
    return _reduce(full, ring)


def ideal_matrix(v, ring: RingCtx):
    """n x n matrix whose row i is poly^-1(X^i poly(v)), row 0 = v."""
    n = ring.n
    if len(v) != n:
        raise ParameterError(f"ideal_matrix needs length {n}, got {len(v)}")
    field = type(v)
    low = _modulus_low(ring, field)
    rows = field.Zeros((n, n))
    row = v.copy()
    for i in range(n):
        rows[i] = row
        shifted = field.Zeros(n)
        shifted[1:] = row[:-1]
        row = shifted - row[-1] * low
    return rows


def hadamard(u, v):
    """Componentwise product."""
    if len(u) != len(v):
        raise ParameterError(f"hadamard needs equal lengths, got {len(u)} and {len(v)}")
    return u * v


# ---------------------------------------------------------------------------
# Linear systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AffineSpace:
    """Solution set particular + span(basis rows)."""

    particular: "galois.FieldArray"
    basis: "galois.FieldArray"

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[0])


def solve_linear(A, b, mode: str = "any"):
    """Solve A x = b exactly over the field of A.

    ``mode="any"`` returns one solution with free variables set to zero;
    ``mode="basis"`` returns an :class:`AffineSpace`. Raises Inconsistent when
    b is outside the column space.
    """
    if mode not in ("any", "basis"):
        raise ParameterError(f"unknown solve mode {mode!r}")
    field = type(A)
    rows, cols = A.shape
    if len(b) != rows:
        raise ParameterError(f"right-hand side has length {len(b)}, expected {rows}")
    augmented = field(np.hstack([as_ints(A), as_ints(b).reshape(-1, 1)]))
    reduced = augmented.row_reduce()
    reduced_ints = as_ints(reduced)

    pivots = []
    for i in range(reduced.shape[0]):
        nonzero = np.flatnonzero(reduced_ints[i])
        if nonzero.size == 0:
            continue
        if nonzero[0] == cols:
            raise Inconsistent("linear system has no solution")
        pivots.append((i, int(nonzero[0])))

    particular = field.Zeros(cols)
    for row, col in pivots:
        particular[col] = reduced[row, cols]
    if mode == "any":
        return particular

    pivot_cols = {col for _, col in pivots}
    free_cols = [c for c in range(cols) if c not in pivot_cols]
    basis = field.Zeros((len(free_cols), cols))
    for k, free in enumerate(free_cols):
        basis[k, free] = 1
        for row, col in pivots:
            basis[k, col] = -reduced[row, free]
    return AffineSpace(particular=particular, basis=basis)


def null_space(A):
    """Rows spanning {x : A x = 0}."""
    field = type(A)
    return solve_linear(A, field.Zeros(A.shape[0]), mode="basis").basis


def row_space_basis(A):
    """Nonzero rows of the reduced row echelon form of A."""
    field = type(A)
    reduced = A.row_reduce()
    keep = [i for i in range(reduced.shape[0]) if np.any(reduced[i] != 0)]
    if not keep:
        return field.Zeros((0, A.shape[1]))
    return reduced[keep]


# ---------------------------------------------------------------------------
# Multivariate monomials
# ---------------------------------------------------------------------------


def monomial_exponents(num_vars: int, max_degree: int, multilinear: bool = False) -> List[Tuple[int, ...]]:
    """Exponent tuples of all monomials up to max_degree in graded lexicographic order.

    Degree 0 first, then x_1..x_t, then degree-2 monomials x_1^2, x_1 x_2, ...
    """
    exponents = []
    for degree in range(max_degree + 1):
        if multilinear:
            combos = itertools.combinations(range(num_vars), degree)
        else:
            combos = itertools.combinations_with_replacement(range(num_vars), degree)
        for combo in combos:
            exps = [0] * num_vars
            for var in combo:
                exps[var] += 1
            exponents.append(tuple(exps))
    return exponents


def evaluate_monomials(points, exponents: Sequence[Tuple[int, ...]], field):
    """Matrix with entry (i, j) = monomial j evaluated at point i."""
    pts = field(as_ints(points).reshape(len(points), -1))
    n = pts.shape[0]
    out = field.Zeros((n, len(exponents)))
    for j, exps in enumerate(exponents):
        column = field.Ones(n)
        for var, e in enumerate(exps):
            if e:
                column = column * (pts[:, var] ** e)
        out[:, j] = column
    return out
