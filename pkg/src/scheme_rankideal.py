"""Symmetric scheme on random rank-metric ideal codes over F_{q^m}.

Ciphertexts are pairs (r_1, v) with v = s . r_1 + x R_2 + g_1 m, where "."
is the vector product modulo the ring polynomial f_n. The secret dual basis
D reads off the g_1 (or, after one multiplication, g_2) coordinate of every
entry of v - s . r_1; all noise lives in the span X_bar that D annihilates.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import galois
import numpy as np

from src.algebra import (
    FieldCtx,
    RingCtx,
    as_ints,
    ideal_matrix,
    mat,
    rank_weight,
    span_basis,
    vector_product,
)
from src.config import MAX_KEYGEN_RETRIES, MAX_SAMPLE_RETRIES
from src.exceptions import Corrupt, MessageError, ParameterError, RetriesExhausted, UnsupportedOp
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


def stated_min_m(w: int) -> int:
    """Smallest m with w(w+3)/2 + 1 < m."""
    return w * (w + 3) // 2 + 2


def operational_min_m(w: int) -> int:
    """Smallest m with w(w+5)/2 + 2 <= m: room for dim X_bar plus g_1, g_2."""
    return w * (w + 5) // 2 + 2


@dataclass(frozen=True)
class RankIdealParams:
    q: int
    m: int
    n: int
    w: int
    additive: bool = False
    ring_poly: Optional[Tuple[int, ...]] = None
    modulus_poly: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.n < 1 or self.w < 1:
            raise ParameterError(f"need n >= 1 and w >= 1, got n={self.n}, w={self.w}")
        if self.additive:
            if not self.w < self.m:
                raise ParameterError(f"additive keys need w < m, got w={self.w}, m={self.m}")
        else:
            if self.m < stated_min_m(self.w):
                raise ParameterError(f"w(w+3)/2 + 1 < m fails for w={self.w}, m={self.m}")
            if self.m < operational_min_m(self.w):
                raise ParameterError(f"need m >= w(w+5)/2 + 2 = {operational_min_m(self.w)}, got m={self.m}")

    @classmethod
    def from_dict(cls, params: Dict[str, Any], additive: bool = False) -> "RankIdealParams":
        ring_poly = params.get("ring_poly")
        modulus_poly = params.get("modulus_poly")
        return cls(q=int(params["q"]), m=int(params["m"]), n=int(params["n"]), w=int(params["w"]),
                   additive=additive,
                   ring_poly=tuple(ring_poly) if ring_poly else None,
                   modulus_poly=tuple(modulus_poly) if modulus_poly else None)

    def field_ctx(self) -> FieldCtx:
        return FieldCtx(self.q, self.m, self.modulus_poly)

    def ring_ctx(self) -> RingCtx:
        poly = self.ring_poly
        if poly is None:
            poly = tuple(int(c) for c in reversed(galois.irreducible_poly(self.q, self.n).coeffs))
        return RingCtx(self.q, ring_poly=poly)


@dataclass(frozen=True, eq=False)
class RankIdealSecretKey:
    """sk = (x, g, D, s) plus the spans and basis they came from."""

    params: RankIdealParams
    ctx: FieldCtx
    ring: RingCtx
    x: "galois.FieldArray"
    a: "galois.FieldArray"
    g: "galois.FieldArray"
    b: "galois.FieldArray"
    B: "galois.FieldArray"
    D: "galois.FieldArray"
    s: "galois.FieldArray"

    @property
    def d(self) -> int:
        """dim X_bar (dim X for additive keys)."""
        return len(self.a)

    @property
    def g1(self):
        return self.g[0]

    @property
    def extract_g1(self):
        return self.D[:, 0]

    @property
    def extract_g2(self):
        if self.params.additive:
            raise UnsupportedOp("additive keys have no g_2 extractor")
        return self.D[:, 1]


@dataclass(frozen=True, eq=False)
class RankIdealCiphertext:
    """(u, v) pair or (a, b, c) product triple."""

    parts: Tuple["galois.FieldArray", ...]

    def __post_init__(self):
        if len(self.parts) not in (2, 3):
            raise ParameterError(f"ciphertexts have 2 or 3 components, got {len(self.parts)}")

    @property
    def arity(self) -> int:
        return len(self.parts)


def _full_rank_vector(ctx: FieldCtx, w: int, rng: RngStream):
    for _ in range(MAX_SAMPLE_RETRIES):
        x = rng.field_elements(ctx.gf, w)
        if rank_weight(x, ctx) == w:
            return x
    raise RetriesExhausted(f"no rank-{w} vector found")


def _extend_to_basis(prefix, ctx: FieldCtx):
    """Append power-basis elements alpha^k that raise the rank until it reaches m."""
    b = prefix.copy()
    rank = rank_weight(b, ctx)
    for k in range(ctx.m):
        if rank == ctx.m:
            break
        candidate = ctx.gf(np.append(as_ints(b), ctx.q ** k))
        new_rank = rank_weight(candidate, ctx)
        if new_rank > rank:
            b, rank = candidate, new_rank
    return b


def _dual_columns(b, ctx: FieldCtx, skip: int):
    """Last m - skip columns of (B^-1)^T with B = Mat(b)."""
    B = mat(b, ctx)
    return B, np.linalg.inv(B).T[:, skip:]


def _secret_in_span(x, ctx: FieldCtx, n: int, rng: RngStream):
    """s in X^n, resampled while s = 0."""
    w = len(x)
    for _ in range(MAX_SAMPLE_RETRIES):
        coeffs = ctx.gf(np.asarray(rng.uniform_ints(ctx.q, n * w), dtype=np.int64).reshape(n, w))
        s = coeffs @ x
        if np.any(s != 0):
            return s
    raise RetriesExhausted("secret vector stayed zero")


def product_span_generators(x, g1) -> "galois.FieldArray":
    """x_i, g_1 x_i and x_i x_j (i <= j): the elements spanning X_bar."""
    w = len(x)
    items = [x, g1 * x]
    items.append(type(x)([int(x[i] * x[j]) for i in range(w) for j in range(i, w)]))
    return type(x)(np.concatenate([as_ints(item) for item in items]))


def keygen(params: RankIdealParams, rng: RngStream) -> RankIdealSecretKey:
    """Multiplicative key: restart until rw(a, g_1, g_1^2) = d + 2."""
    if params.additive:
        return keygen_additive(params, rng)
    ctx, ring = params.field_ctx(), params.ring_ctx()
    for attempt in range(1, MAX_KEYGEN_RETRIES + 1):
        g1 = rng.field_elements(ctx.gf, 1)[0]
        x = _full_rank_vector(ctx, params.w, rng)
        a = span_basis(product_span_generators(x, g1), ctx)
        d = len(a)
        g2 = g1 * g1
        head = ctx.gf(np.concatenate([as_ints(a), [int(g1), int(g2)]]))
        if d + 2 > ctx.m or rank_weight(head, ctx) != d + 2:
            logger.debug(f"rank-ideal keygen attempt {attempt}: rank check failed (d={d}), restarting")
            continue
        b = _extend_to_basis(head, ctx)
        B, D = _dual_columns(b, ctx, d)
        s = _secret_in_span(x, ctx, params.n, rng)
        logger.info(f"rank-ideal keygen: q={params.q}, m={params.m}, n={params.n}, w={params.w}, "
                    f"dim X_bar={d} (attempt {attempt})")
        return RankIdealSecretKey(params=params, ctx=ctx, ring=ring, x=x, a=a, g=b[d:], b=b, B=B, D=D, s=s)
    raise RetriesExhausted(f"rank check failed {MAX_KEYGEN_RETRIES} times")


def keygen_additive(params: RankIdealParams, rng: RngStream) -> RankIdealSecretKey:
    """Additive-only key: x extended straight to a basis, D from the last m - w columns."""
    ctx, ring = params.field_ctx(), params.ring_ctx()
    x = _full_rank_vector(ctx, params.w, rng)
    b = _extend_to_basis(x, ctx)
    B, D = _dual_columns(b, ctx, params.w)
    s = _secret_in_span(x, ctx, params.n, rng)
    logger.info(f"rank-ideal additive keygen: q={params.q}, m={params.m}, n={params.n}, w={params.w}")
    return RankIdealSecretKey(params=params, ctx=ctx, ring=ring, x=x, a=x.copy(), g=b[params.w:], b=b, B=B,
                              D=D, s=s)


def new_ledger(sk: RankIdealSecretKey) -> EncryptionLedger:
    """Published-ciphertext counter warning at 2w ciphertexts."""
    return EncryptionLedger(warn_at=2 * sk.params.w, label="rank-ideal")


def _message_vector(msg: Sequence[int], sk: RankIdealSecretKey):
    values = [int(v) for v in msg]
    if len(values) != sk.params.n or any(not 0 <= v < sk.params.q for v in values):
        raise MessageError(f"message must be {sk.params.n} elements of F_{sk.params.q}")
    return sk.ctx.gf(np.asarray(values, dtype=np.int64))


def encrypt(msg: Sequence[int], sk: RankIdealSecretKey, rng: RngStream,
            ledger: Optional[EncryptionLedger] = None) -> RankIdealCiphertext:
    """(r_1, v) with v = s . r_1 + x R_2 + g_1 m."""
    m_ext = _message_vector(msg, sk)
    if ledger is not None:
        ledger.record()
    params, ctx = sk.params, sk.ctx
    r1 = rng.field_elements(ctx.gf, params.n)
    R2 = ctx.gf(np.asarray(rng.uniform_ints(params.q, params.w * params.n), dtype=np.int64).reshape(params.w, params.n))
    e = sk.x @ R2
    v = vector_product(sk.s, r1, sk.ring) + e + sk.g1 * m_ext
    return RankIdealCiphertext((r1, v))


def _extract(z, column, sk: RankIdealSecretKey) -> List[int]:
    return [int(c) for c in as_ints(column @ mat(z, sk.ctx))]


def decrypt(ct: RankIdealCiphertext, sk: RankIdealSecretKey) -> List[int]:
    """m = d^T Mat(v - s . r_1)."""
    if ct.arity != 2:
        raise UnsupportedOp("decrypt takes a (u, v) pair; use decrypt_product for triples")
    u, v = ct.parts
    return _extract(v - vector_product(sk.s, u, sk.ring), sk.extract_g1, sk)


def eval_add(ct1: RankIdealCiphertext, ct2: RankIdealCiphertext) -> RankIdealCiphertext:
    if ct1.arity != ct2.arity:
        raise UnsupportedOp("cannot add a pair and a product triple")
    return RankIdealCiphertext(tuple(p + q for p, q in zip(ct1.parts, ct2.parts)))


def eval_ptmult(plain: Sequence[int], ct: RankIdealCiphertext, sk_or_ring) -> RankIdealCiphertext:
    """Plaintext absorption m'' . ct, componentwise."""
    ring = sk_or_ring.ring if isinstance(sk_or_ring, RankIdealSecretKey) else sk_or_ring
    field = type(ct.parts[0])
    values = [int(v) for v in plain]
    if len(values) != ring.n or any(not 0 <= v < ring.coeff_modulus for v in values):
        raise MessageError(f"plaintext must be {ring.n} elements of F_{ring.coeff_modulus}")
    m2 = field(np.asarray(values, dtype=np.int64))
    return RankIdealCiphertext(tuple(vector_product(m2, part, ring) for part in ct.parts))


def eval_mult(ct1: RankIdealCiphertext, ct2: RankIdealCiphertext, ring: RingCtx) -> RankIdealCiphertext:
    """(v . v', -(u . v' + u' . v), u . u')."""
    if ct1.arity != 2 or ct2.arity != 2:
        raise UnsupportedOp("only fresh (u, v) pairs can be multiplied")
    (u, v), (u2, v2) = ct1.parts, ct2.parts
    a = vector_product(v, v2, ring)
    b = -(vector_product(u, v2, ring) + vector_product(u2, v, ring))
    c = vector_product(u, u2, ring)
    return RankIdealCiphertext((a, b, c))


def decrypt_product(ct: RankIdealCiphertext, sk: RankIdealSecretKey) -> List[int]:
    """m . m' = d'^T Mat(a + s . b + s . s . c)."""
    if ct.arity != 3:
        raise UnsupportedOp("decrypt_product takes an (a, b, c) triple")
    a, b, c = ct.parts
    ring = sk.ring
    t = a + vector_product(sk.s, b, ring) + vector_product(sk.s, vector_product(sk.s, c, ring), ring)
    return _extract(t, sk.extract_g2, sk)


def plaintext_product(m1: Sequence[int], m2: Sequence[int], ring: RingCtx) -> List[int]:
    field = galois.GF(ring.coeff_modulus)
    u = field(np.asarray(m1, dtype=np.int64))
    v = field(np.asarray(m2, dtype=np.int64))
    return [int(c) for c in as_ints(vector_product(u, v, ring))]


def irsd_instance(cts: Sequence[RankIdealCiphertext], messages: Sequence[Sequence[int]],
                  sk: RankIdealSecretKey) -> Dict[str, Any]:
    """Syndrome form of l ciphertexts with known plaintexts: y = x H^T for an (l+1)-ideal code.

    x = (s, e_1, ..., e_l) has rank weight at most w; H has block row i equal
    to (IM(r_1,i)^T | 0 ... I ... 0).
    """
    if not cts or len(cts) != len(messages):
        raise ParameterError("need one plaintext per ciphertext")
    n, field = sk.params.n, sk.ctx.gf
    blocks = len(cts)
    H = field.Zeros((blocks * n, (blocks + 1) * n))
    ys, errors = [], []
    for i, (ct, msg) in enumerate(zip(cts, messages)):
        if ct.arity != 2:
            raise UnsupportedOp("syndrome export takes fresh pairs")
        u, v = ct.parts
        H[i * n:(i + 1) * n, :n] = ideal_matrix(u, sk.ring).T
        H[i * n:(i + 1) * n, (i + 1) * n:(i + 2) * n] = field.Identity(n)
        y_i = v - sk.g1 * _message_vector(msg, sk)
        ys.append(y_i)
        errors.append(y_i - vector_product(sk.s, u, sk.ring))
    x = field(np.concatenate([as_ints(sk.s)] + [as_ints(e) for e in errors]))
    y = field(np.concatenate([as_ints(v) for v in ys]))
    if np.any(x @ H.T != y):
        raise ParameterError("syndrome export does not satisfy y = x H^T")
    weight = rank_weight(x, sk.ctx)
    if weight > sk.params.w:
        raise ParameterError(f"exported error has rank weight {weight} > w={sk.params.w}")
    return {"H": H, "y": y, "x": x, "rank_weight": weight, "s": blocks + 1}


# ---------------------------------------------------------------------------
# Envelope adapters
# ---------------------------------------------------------------------------


class RankIdealAdapter(SchemeAdapter):
    scheme = SchemeId.RANK_IDEAL
    supported_ops = frozenset({"add", "mult", "ptmult"})
    additive = False

    def build_keys(self, params, rng):
        return keygen(RankIdealParams.from_dict(params, additive=self.additive), rng)

    def make_ledger(self, keys) -> EncryptionLedger:
        return new_ledger(keys)

    def parse_message(self, obj, keys):
        n, q = keys.params.n, keys.params.q
        if (not isinstance(obj, list) or len(obj) != n
                or any(isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < q for v in obj)):
            raise MessageError(f"expected {n} integers in [0, {q})")
        return list(obj)

    def format_message(self, message):
        return [int(v) for v in message]

    def random_message(self, rng, keys):
        return rng.uniform_ints(keys.params.q, keys.params.n)

    def expected(self, op, messages, keys):
        q = keys.params.q
        if op == "add":
            return [(a + b) % q for a, b in zip(*messages)]
        if op == "mult":
            return plaintext_product(messages[0], messages[1], keys.ring)
        if op == "ptmult":
            return plaintext_product(messages[1], messages[0], keys.ring)
        return super().expected(op, messages, keys)

    def mult_budget(self, keys):
        return 2

    def _width(self, keys) -> int:
        return int_width(keys.ctx.order)

    def _ciphertext(self, envelope, keys) -> RankIdealCiphertext:
        n = keys.params.n
        values = unpack_ints(envelope.payload, self._width(keys), envelope.arity * n)
        if any(v >= keys.ctx.order for v in values):
            raise Corrupt("extension-field element out of range")
        flat = keys.ctx.gf(np.asarray(values, dtype=np.int64))
        return RankIdealCiphertext(tuple(flat[i * n:(i + 1) * n] for i in range(envelope.arity)))

    def _envelope(self, ct: RankIdealCiphertext, keys) -> CiphertextEnvelope:
        payload = pack_ints(np.concatenate([as_ints(p) for p in ct.parts]), self._width(keys))
        return CiphertextEnvelope(self.scheme, payload, arity=ct.arity)

    def encrypt_envelope(self, message, keys, rng):
        return self._envelope(encrypt(message, keys, rng, ledger=self.ledger(keys)), keys)

    def decrypt_envelope(self, envelope, keys):
        ct = self._ciphertext(envelope, keys)
        return decrypt(ct, keys) if ct.arity == 2 else decrypt_product(ct, keys)

    def evaluate(self, op, envelopes, keys, operand=None):
        cts = [self._ciphertext(e, keys) for e in envelopes]
        if op == "add":
            out = eval_add(*cts)
        elif op == "ptmult":
            out = eval_ptmult(self.parse_message(operand, keys), cts[0], keys.ring)
        else:
            if self.additive:
                raise UnsupportedOp("additive rank-ideal keys do not support ciphertext multiplication")
            out = eval_mult(cts[0], cts[1], keys.ring)
        return self._envelope(out, keys)


class AdditiveRankIdealAdapter(RankIdealAdapter):
    scheme = SchemeId.RANK_IDEAL_ADDITIVE
    supported_ops = frozenset({"add", "ptmult"})
    additive = True

    def mult_budget(self, keys):
        return 1
