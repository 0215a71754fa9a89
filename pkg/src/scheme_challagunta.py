"""Binary Reed-Muller schemes: an embedded-codeword vector scheme and a permuted-matrix scheme.

Vector variant: a codeword p G_rm is hidden at secret positions K inside a
long uniformly random bit vector. Matrix variant: the rows m_i v_i of
m x G_rm receive errors inside a secret bad-location set S1, the entries of
the k x n matrix are permuted by S2, and decryption sums the rows and runs
Reed majority decoding.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.algebra import as_ints, solve_linear
from src.codes import GF2, BinaryRM, build_binary_rm, reed_decode
from src.exceptions import Inconsistent, MessageError, NotInCode, ParameterError
from src.he_core import (
    CiphertextEnvelope,
    RngStream,
    SchemeAdapter,
    SchemeId,
    pack_bits,
    unpack_bits,
)

logger = logging.getLogger(__name__)

ANCHOR_MODES = ("first-ciphertext-bit", "first-embedded-position")


def rm_dimension(r: int, m: int) -> int:
    return sum(math.comb(m, i) for i in range(r + 1))


def select_rm(p: int) -> Tuple[int, int]:
    """Smallest first-order RM(1, m) with k >= 2p and n >= 2k."""
    m = 1
    while True:
        k = rm_dimension(1, m)
        if k >= 2 * p and 2 ** m >= 2 * k:
            return 1, m
        m += 1


# ---------------------------------------------------------------------------
# Vector variant
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CGVectorKey:
    rm: BinaryRM
    K: Tuple[int, ...]
    ell: int
    p: int

    @property
    def prefix_len(self) -> int:
        return self.rm.k - self.p


def cgv_keygen(p: int, rng: RngStream, r: Optional[int] = None, m: Optional[int] = None,
               ell: Optional[int] = None) -> CGVectorKey:
    """Key for p-bit messages; RM(r, m) is auto-selected when not given."""
    if p < 1:
        raise ParameterError(f"message length p must be positive, got {p}")
    if r is None or m is None:
        r, m = select_rm(p)
    rm = build_binary_rm(r, m)
    if rm.k < p:
        raise ParameterError(f"RM({r},{m}) has k={rm.k} < p={p}")
    if rm.k < 2 * p or rm.n < 2 * rm.k:
        logger.warning(f"RM({r},{m}) violates k >= 2p or n >= 2k (k={rm.k}, n={rm.n}, p={p}); "
                       f"the random prefix is only {rm.k - p} bits")
    ell = rm.n ** 2 if ell is None else int(ell)
    if ell < rm.n ** 2:
        raise ParameterError(f"ciphertext length {ell} must be at least n^2 = {rm.n ** 2}")
    K = tuple(sorted(rng.sample(ell, rm.n)))
    return CGVectorKey(rm=rm, K=K, ell=ell, p=p)


def _pad_message(msg: Sequence[int], p: int) -> List[int]:
    bits = [int(b) for b in msg]
    if len(bits) > p:
        raise MessageError(f"message has {len(bits)} bits, at most {p} allowed")
    if any(b not in (0, 1) for b in bits):
        raise MessageError("message entries must be bits")
    return [0] * (p - len(bits)) + bits


def cgv_encrypt(msg: Sequence[int], key: CGVectorKey, rng: RngStream):
    """u uniform of length ell with positions K overwritten by (prefix || msg) G_rm."""
    block = rng.bits(key.prefix_len) + _pad_message(msg, key.p)
    w = GF2(block) @ key.rm.G
    c = GF2(rng.bits(key.ell))
    c[list(key.K)] = w
    return c


def cgv_decrypt(c, key: CGVectorKey) -> List[int]:
    """Solve p G_rm = c|_K and return the trailing p bits."""
    if len(c) != key.ell:
        raise ParameterError(f"ciphertext length {len(c)} does not match ell={key.ell}")
    w = GF2(as_ints(c)[list(key.K)])
    try:
        block = solve_linear(key.rm.G.T, w)
    except Inconsistent as exc:
        raise NotInCode("embedded word is not a Reed-Muller codeword") from exc
    return [int(b) for b in as_ints(block)[key.prefix_len:]]


def cgv_eval_add(c1, c2):
    if len(c1) != len(c2):
        raise ParameterError("ciphertext lengths differ")
    return c1 + c2


def cgv_eval_mult(c1, c2, anchor_mode: str = "first-ciphertext-bit", key: Optional[CGVectorKey] = None):
    """z_i = x_i y_i + x_i y_a + y_i x_a for an anchor position a.

    ``first-ciphertext-bit`` anchors at position 0; ``first-embedded-position``
    anchors at min(K) and therefore needs the key.
    """
    if len(c1) != len(c2):
        raise ParameterError("ciphertext lengths differ")
    if anchor_mode == "first-ciphertext-bit":
        a = 0
    elif anchor_mode == "first-embedded-position":
        if key is None:
            raise ParameterError("first-embedded-position anchoring needs the key")
        a = key.K[0]
    else:
        raise ParameterError(f"unknown anchor mode {anchor_mode!r}")
    return c1 * c2 + c1 * c2[a] + c2 * c1[a]


def cgv_mult_agreement(key: CGVectorKey, rng: RngStream, anchor_mode: str,
                       pairs: Optional[Sequence[Tuple[Sequence[int], Sequence[int]]]] = None) -> Dict[str, float]:
    """Measure how often Dec(Mult) equals the bitwise AND (exhaustive over p-bit pairs by default).

    Undecodable products count as disagreements.
    """
    if pairs is None:
        space = [[(v >> (key.p - 1 - i)) & 1 for i in range(key.p)] for v in range(2 ** key.p)]
        pairs = [(a, b) for a in space for b in space]
    agree = undecodable = 0
    for a, b in pairs:
        product = cgv_eval_mult(cgv_encrypt(a, key, rng), cgv_encrypt(b, key, rng), anchor_mode, key)
        want = [x & y for x, y in zip(_pad_message(a, key.p), _pad_message(b, key.p))]
        try:
            agree += int(cgv_decrypt(product, key) == want)
        except NotInCode:
            undecodable += 1
    total = len(pairs)
    logger.info(f"cg-vector mult ({anchor_mode}): {agree}/{total} agree, {undecodable} undecodable")
    return {"anchor_mode": anchor_mode, "trials": total, "agree": agree, "undecodable": undecodable,
            "agreement_rate": agree / total if total else 0.0}


# ---------------------------------------------------------------------------
# Matrix variant
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CGMatrixKey:
    """sk = (S1, S2) with S2 a permutation of the k * n flattened entries."""

    rm: BinaryRM
    S1: Tuple[int, ...]
    S2: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rm.k, self.rm.n


def cgm_keygen(r: int, m: int, bad_locations: int, rng: RngStream,
               identity_permutation: bool = False) -> CGMatrixKey:
    if m < 2 or not 0 < r <= m:
        raise ParameterError(f"need m >= 2 and 0 < r <= m, got r={r}, m={m}")
    rm = build_binary_rm(r, m)
    if not 1 <= bad_locations or 2 * bad_locations >= rm.d:
        raise ParameterError(f"need 1 <= |S1| < d/2 = {rm.d / 2}, got {bad_locations}")
    S1 = tuple(sorted(rng.sample(rm.n, bad_locations)))
    size = rm.k * rm.n
    S2 = np.arange(size) if identity_permutation else np.asarray(rng.permutation(size), dtype=np.int64)
    return CGMatrixKey(rm=rm, S1=S1, S2=S2)


def _permute(matrix, key: CGMatrixKey):
    out = GF2.Zeros(matrix.size)
    out[key.S2] = matrix.reshape(-1)
    return out.reshape(key.shape)


def _unpermute(matrix, key: CGMatrixKey):
    return matrix.reshape(-1)[key.S2].reshape(key.shape)


def _error_matrix(key: CGMatrixKey, rng: RngStream):
    k, n = key.shape
    E = GF2.Zeros((k, n))
    for i in range(k):
        chosen = []
        while not chosen:
            chosen = [j for j in key.S1 if rng.randbelow(2)]
        E[i, chosen] = 1
    return E


def cgm_encrypt(msg: Sequence[int], key: CGMatrixKey, rng: RngStream, zero_error: bool = False, error=None):
    """C = sigma_S2(m x G_rm + E).

    ``zero_error`` and ``error`` override E (for tests of the decoding radius).
    """
    k, n = key.shape
    bits = [int(b) for b in msg]
    if len(bits) != k or any(b not in (0, 1) for b in bits):
        raise MessageError(f"message must be {k} bits")
    W = GF2(np.asarray(bits, dtype=np.int64)[:, None] * as_ints(key.rm.G))
    if error is not None:
        E = GF2(as_ints(error).reshape(k, n))
    elif zero_error:
        E = GF2.Zeros((k, n))
    else:
        E = _error_matrix(key, rng)
    return _permute(W + E, key)


def cgm_decrypt(C, key: CGMatrixKey) -> List[int]:
    """Unpermute, sum the rows and Reed-decode."""
    if tuple(C.shape) != key.shape:
        raise ParameterError(f"ciphertext shape {tuple(C.shape)} does not match {key.shape}")
    w = _unpermute(C, key).sum(axis=0)
    return [int(b) for b in as_ints(reed_decode(w, key.rm))]


def cgm_eval_add(C1, C2):
    if C1.shape != C2.shape:
        raise ParameterError("ciphertext shapes differ")
    return C1 + C2


def cgm_eval_mult(C1, C2):
    if C1.shape != C2.shape:
        raise ParameterError("ciphertext shapes differ")
    return C1 * C2


# ---------------------------------------------------------------------------
# Envelope adapters
# ---------------------------------------------------------------------------


def _parse_bits(obj, length: int, exact: bool) -> List[int]:
    if not isinstance(obj, list) or any(isinstance(b, bool) or b not in (0, 1) for b in obj):
        raise MessageError(f"expected a list of bits, got {obj!r}")
    if len(obj) > length or (exact and len(obj) != length):
        raise MessageError(f"expected {'exactly' if exact else 'at most'} {length} bits, got {len(obj)}")
    return [0] * (length - len(obj)) + list(obj)


class VectorAdapter(SchemeAdapter):
    scheme = SchemeId.CG_VECTOR
    supported_ops = frozenset({"add", "mult"})

    def __init__(self, anchor_mode: str = "first-ciphertext-bit"):
        super().__init__()
        self.anchor_mode = anchor_mode

    def build_keys(self, params, rng):
        return cgv_keygen(int(params["p"]), rng, r=params.get("r"), m=params.get("m"), ell=params.get("ell"))

    def parse_message(self, obj, keys):
        return _parse_bits(obj, keys.p, exact=False)

    def format_message(self, message):
        return [int(b) for b in message]

    def random_message(self, rng, keys):
        return rng.bits(keys.p)

    def expected(self, op, messages, keys):
        a, b = messages
        if op == "add":
            return [x ^ y for x, y in zip(a, b)]
        if op == "mult":
            return [x & y for x, y in zip(a, b)]
        return super().expected(op, messages, keys)

    def encrypt_envelope(self, message, keys, rng):
        return CiphertextEnvelope(self.scheme, pack_bits(as_ints(cgv_encrypt(message, keys, rng))))

    def decrypt_envelope(self, envelope, keys):
        return cgv_decrypt(GF2(unpack_bits(envelope.payload, keys.ell)), keys)

    def evaluate(self, op, envelopes, keys, operand=None):
        c1, c2 = (GF2(unpack_bits(e.payload, keys.ell)) for e in envelopes)
        out = cgv_eval_add(c1, c2) if op == "add" else cgv_eval_mult(c1, c2, self.anchor_mode, keys)
        return CiphertextEnvelope(self.scheme, pack_bits(as_ints(out)))


class MatrixAdapter(SchemeAdapter):
    scheme = SchemeId.CG_MATRIX
    supported_ops = frozenset({"add", "mult"})

    def build_keys(self, params, rng):
        return cgm_keygen(int(params["r"]), int(params["m"]), int(params.get("bad_locations", 1)), rng)

    def parse_message(self, obj, keys):
        return _parse_bits(obj, keys.rm.k, exact=True)

    def format_message(self, message):
        return [int(b) for b in message]

    def random_message(self, rng, keys):
        return rng.bits(keys.rm.k)

    def expected(self, op, messages, keys):
        a, b = messages
        if op == "add":
            return [x ^ y for x, y in zip(a, b)]
        if op == "mult":
            return [x & y for x, y in zip(a, b)]
        return super().expected(op, messages, keys)

    def _matrix(self, envelope, keys):
        k, n = keys.shape
        return GF2(unpack_bits(envelope.payload, k * n).reshape(k, n))

    def encrypt_envelope(self, message, keys, rng):
        C = cgm_encrypt(message, keys, rng)
        return CiphertextEnvelope(self.scheme, pack_bits(as_ints(C).reshape(-1)))

    def decrypt_envelope(self, envelope, keys):
        return cgm_decrypt(self._matrix(envelope, keys), keys)

    def evaluate(self, op, envelopes, keys, operand=None):
        C1, C2 = (self._matrix(e, keys) for e in envelopes)
        out = cgm_eval_add(C1, C2) if op == "add" else cgm_eval_mult(C1, C2)
        return CiphertextEnvelope(self.scheme, pack_bits(as_ints(out).reshape(-1)))
