"""Scheme-agnostic contracts: ids, envelopes, key bundles, seeded randomness, dispatch."""

import hashlib
import importlib
import json
import logging
import math
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.config import FORMAT_VERSION, GAUSSIAN_TAIL_SIGMAS, SEED_BYTES
from src.exceptions import (
    BudgetExceeded,
    Corrupt,
    EncryptionBudgetExceeded,
    ParameterError,
    SchemeMismatch,
    UnsupportedOp,
    VersionMismatch,
)

logger = logging.getLogger(__name__)

OPS = ("add", "mult", "ptmult", "refresh", "rescale")


class SchemeId(Enum):
    """Every scheme variant the library implements."""

    ARMKNECHT = "armknecht"
    CG_VECTOR = "cg-vector"
    CG_MATRIX = "cg-matrix"
    BOGDANOV_LEE = "bogdanov-lee"
    RANK_IDEAL = "rank-ideal"
    RANK_IDEAL_ADDITIVE = "rank-ideal-additive"
    INTPOLY = "intpoly"
    MVIDEAL = "mvideal"
    BFV = "bfv"
    CKKS = "ckks"

    @property
    def code(self) -> int:
        return list(SchemeId).index(self) + 1

    @classmethod
    def from_code(cls, code: int) -> "SchemeId":
        members = list(cls)
        if not 1 <= code <= len(members):
            raise Corrupt(f"unknown scheme code {code}")
        return members[code - 1]


# family, key type, homomorphism class
SCHEME_CATALOGUE: Dict[SchemeId, Tuple[str, str, str]] = {
    SchemeId.ARMKNECHT: ("code-based", "symmetric", "somewhat"),
    SchemeId.CG_VECTOR: ("code-based", "symmetric", "somewhat"),
    SchemeId.CG_MATRIX: ("code-based", "symmetric", "somewhat"),
    SchemeId.BOGDANOV_LEE: ("code-based", "asymmetric", "somewhat"),
    SchemeId.RANK_IDEAL: ("code-based", "symmetric", "somewhat"),
    SchemeId.RANK_IDEAL_ADDITIVE: ("code-based", "symmetric", "partial"),
    SchemeId.INTPOLY: ("polynomial", "symmetric", "somewhat"),
    SchemeId.MVIDEAL: ("polynomial", "symmetric", "somewhat"),
    SchemeId.BFV: ("polynomial", "asymmetric", "leveled"),
    SchemeId.CKKS: ("polynomial", "asymmetric", "approximate"),
}


# ---------------------------------------------------------------------------
# Envelopes and key bundles
# ---------------------------------------------------------------------------

_ENVELOPE_HEADER = struct.Struct("<BBHHBI")


@dataclass(frozen=True)
class CiphertextEnvelope:
    """Scheme-tagged ciphertext plus evaluation metadata."""

    scheme: SchemeId
    payload: bytes
    gamma: int = 1
    level: int = 0
    arity: int = 1

    def __post_init__(self):
        if self.arity not in (1, 2, 3):
            raise ParameterError(f"arity must be 1, 2 or 3, got {self.arity}")
        if not 0 <= self.gamma < 2 ** 16 or not 0 <= self.level < 2 ** 16:
            raise ParameterError("gamma and level must fit in 16 bits")

    def to_bytes(self) -> bytes:
        header = _ENVELOPE_HEADER.pack(
            FORMAT_VERSION, self.scheme.code, self.gamma, self.level, self.arity, len(self.payload)
        )
        return header + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "CiphertextEnvelope":
        if len(data) < 1:
            raise Corrupt("empty envelope")
        if data[0] != FORMAT_VERSION:
            raise VersionMismatch(f"envelope version {data[0]}, expected {FORMAT_VERSION}")
        if len(data) < _ENVELOPE_HEADER.size:
            raise Corrupt("truncated envelope header")
        _, code, gamma, level, arity, length = _ENVELOPE_HEADER.unpack_from(data)
        payload = data[_ENVELOPE_HEADER.size:]
        if len(payload) != length:
            raise Corrupt(f"payload length {len(payload)} does not match header {length}")
        try:
            return cls(SchemeId.from_code(code), bytes(payload), gamma, level, arity)
        except ParameterError as exc:
            raise Corrupt(str(exc)) from exc

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def with_metadata(self, **changes) -> "CiphertextEnvelope":
        values = {"scheme": self.scheme, "payload": self.payload, "gamma": self.gamma,
                  "level": self.level, "arity": self.arity}
        values.update(changes)
        return CiphertextEnvelope(**values)


@dataclass(frozen=True)
class KeyBundle:
    """Serializable key material: JSON header plus named binary sections.

    Secret material is re-derived from (params, seed); public sections are
    stored so that a holder without the seed can still encrypt or evaluate.
    """

    scheme: SchemeId
    params: Dict[str, Any]
    seed: bytes
    sections: Dict[str, bytes] = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        names = sorted(self.sections)
        header = {
            "scheme": self.scheme.value,
            "params": self.params,
            "seed": self.seed.hex(),
            "sections": [{"name": name, "length": len(self.sections[name])} for name in names],
        }
        encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        body = b"".join(self.sections[name] for name in names)
        return struct.pack("<BI", FORMAT_VERSION, len(encoded)) + encoded + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "KeyBundle":
        if len(data) < 1:
            raise Corrupt("empty key file")
        if data[0] != FORMAT_VERSION:
            raise VersionMismatch(f"key version {data[0]}, expected {FORMAT_VERSION}")
        if len(data) < 5:
            raise Corrupt("truncated key header")
        (length,) = struct.unpack_from("<I", data, 1)
        raw = data[5:5 + length]
        if len(raw) != length:
            raise Corrupt("truncated key header")
        try:
            header = json.loads(raw.decode())
            scheme = SchemeId(header["scheme"])
            seed = bytes.fromhex(header["seed"])
            layout = [(s["name"], int(s["length"])) for s in header["sections"]]
            params = dict(header["params"])
        except (ValueError, KeyError, TypeError) as exc:
            raise Corrupt(f"malformed key header: {exc}") from exc
        offset = 5 + length
        sections = {}
        for name, size in layout:
            chunk = data[offset:offset + size]
            if len(chunk) != size:
                raise Corrupt(f"truncated key section {name!r}")
            sections[name] = bytes(chunk)
            offset += size
        if offset != len(data):
            raise Corrupt("trailing bytes after key sections")
        return cls(scheme, params, seed, sections)

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Payload codecs
# ---------------------------------------------------------------------------


def int_width(modulus: int) -> int:
    """Bytes needed for values in [0, modulus)."""
    return max(1, (max(modulus - 1, 1).bit_length() + 7) // 8)


def pack_ints(values: Iterable[int], width: int) -> bytes:
    return b"".join(int(v).to_bytes(width, "little") for v in values)


def unpack_ints(data: bytes, width: int, count: Optional[int] = None) -> List[int]:
    if len(data) % width:
        raise Corrupt(f"payload length {len(data)} is not a multiple of {width}")
    values = [int.from_bytes(data[i:i + width], "little") for i in range(0, len(data), width)]
    if count is not None and len(values) != count:
        raise Corrupt(f"expected {count} values, found {len(values)}")
    return values


def pack_bigints(values: Sequence[int]) -> bytes:
    """Length-prefixed sign-magnitude little-endian integers."""
    parts = [struct.pack("<I", len(values))]
    for v in values:
        magnitude = abs(int(v))
        raw = magnitude.to_bytes(max(1, (magnitude.bit_length() + 7) // 8), "little")
        parts.append(struct.pack("<IB", len(raw), 1 if v < 0 else 0) + raw)
    return b"".join(parts)


def unpack_bigints(data: bytes) -> List[int]:
    try:
        (count,) = struct.unpack_from("<I", data, 0)
        offset = 4
        values = []
        for _ in range(count):
            size, sign = struct.unpack_from("<IB", data, offset)
            offset += 5
            raw = data[offset:offset + size]
            if len(raw) != size or sign > 1:
                raise Corrupt("truncated or malformed big integer")
            offset += size
            magnitude = int.from_bytes(raw, "little")
            values.append(-magnitude if sign else magnitude)
    except struct.error as exc:
        raise Corrupt(f"truncated big-integer payload: {exc}") from exc
    if offset != len(data):
        raise Corrupt("trailing bytes after big-integer payload")
    return values


def pack_bits(bits: Sequence[int]) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8) & 1, bitorder="little").tobytes()


def unpack_bits(data: bytes, count: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    if len(data) != (count + 7) // 8:
        raise Corrupt(f"expected {count} packed bits, got {len(data)} bytes")
    return bits[:count].astype(np.int64)


# ---------------------------------------------------------------------------
# Deterministic randomness
# ---------------------------------------------------------------------------


def seed_from_int(value: int) -> bytes:
    if value < 0:
        raise ParameterError("seeds must be non-negative")
    return int(value).to_bytes(SEED_BYTES, "little")


class RngStream:
    """SHAKE-256 counter-mode byte stream; identical seeds give identical streams.

    Single owner: never share one stream between concurrent users, fork it.
    """

    _BLOCK = 136

    def __init__(self, seed: bytes):
        if len(seed) != SEED_BYTES:
            raise ParameterError(f"seed must be {SEED_BYTES} bytes, got {len(seed)}")
        self.seed = bytes(seed)
        self.counter = 0
        self._buffer = b""

    @classmethod
    def from_int(cls, value: int) -> "RngStream":
        return cls(seed_from_int(value))

    def fork(self, label: str) -> "RngStream":
        """Independent child stream derived from this stream's seed and a label."""
        return RngStream(hashlib.sha256(self.seed + label.encode()).digest())

    def read(self, nbytes: int) -> bytes:
        while len(self._buffer) < nbytes:
            block = hashlib.shake_256(self.seed + self.counter.to_bytes(8, "little")).digest(self._BLOCK)
            self.counter += 1
            self._buffer += block
        out, self._buffer = self._buffer[:nbytes], self._buffer[nbytes:]
        return out

    def randbelow(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection."""
        if bound < 1:
            raise ParameterError(f"bound must be positive, got {bound}")
        bits = bound.bit_length()
        nbytes = (bits + 7) // 8
        mask = (1 << bits) - 1
        while True:
            value = int.from_bytes(self.read(nbytes), "little") & mask
            if value < bound:
                return value

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in [low, high]."""
        return low + self.randbelow(high - low + 1)

    def uniform_ints(self, bound: int, size: int) -> List[int]:
        return [self.randbelow(bound) for _ in range(size)]

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits."""
        return (int.from_bytes(self.read(7), "little") >> 3) / float(1 << 53)

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def bits(self, size: int) -> List[int]:
        return [self.randbelow(2) for _ in range(size)]

    def permutation(self, n: int) -> List[int]:
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def sample(self, n: int, k: int) -> List[int]:
        """k distinct indices from range(n), in sampling order."""
        if not 0 <= k <= n:
            raise ParameterError(f"cannot sample {k} of {n}")
        items = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]

    def ternary(self, size: int) -> List[int]:
        return [self.randbelow(3) - 1 for _ in range(size)]

    def discrete_gaussian(self, sigma: float) -> int:
        """Integer with weight exp(-x^2 / (2 sigma^2)), tail cut at 6 sigma, by rejection."""
        if sigma <= 0:
            return 0
        bound = max(1, math.ceil(GAUSSIAN_TAIL_SIGMAS * sigma))
        while True:
            x = self.randint(-bound, bound)
            if self.random() < math.exp(-(x * x) / (2.0 * sigma * sigma)):
                return x

    def field_elements(self, field, size: int, nonzero: bool = False):
        """Uniform galois FieldArray of the given length."""
        low = 1 if nonzero else 0
        return field(np.asarray([low + self.randbelow(field.order - low) for _ in range(size)], dtype=np.int64))


# ---------------------------------------------------------------------------
# Noise and encryption bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseReport:
    """Observed noise against the bound under which decryption is correct."""

    scheme: SchemeId
    observed: float
    bound: float
    correct: bool

    @property
    def budget_bits(self) -> float:
        """log2(bound / observed); negative once the noise crossed the bound."""
        if self.observed <= 0:
            return math.inf
        if self.bound <= 0:
            return -math.inf
        return math.log2(self.bound / self.observed)


class EncryptionLedger:
    """Per-key encryption counter with an optional hard limit and warning threshold."""

    def __init__(self, limit: Optional[int] = None, warn_at: Optional[int] = None, enforce: bool = True,
                 label: str = ""):
        self.limit = limit
        self.warn_at = warn_at
        self.enforce = enforce
        self.label = label
        self.count = 0

    def record(self) -> int:
        if self.limit is not None and self.count >= self.limit:
            if self.enforce:
                raise EncryptionBudgetExceeded(f"{self.label}: all {self.limit} encryptions used")
            logger.warning(f"{self.label}: encryption {self.count + 1} exceeds the budget of {self.limit}")
        self.count += 1
        if self.warn_at is not None and self.count == self.warn_at:
            logger.warning(f"{self.label}: {self.count} ciphertexts published under one key")
        return self.count


# ---------------------------------------------------------------------------
# Adapter contract and dispatch
# ---------------------------------------------------------------------------


class SchemeAdapter(ABC):
    """Envelope-level face of one scheme: keys, messages, payloads, evaluation."""

    scheme: SchemeId
    supported_ops: frozenset = frozenset()

    def __init__(self):
        self._keys: Dict[str, Any] = {}
        self._ledgers: Dict[str, EncryptionLedger] = {}
        # keys built outside keygen/load, held so their ids stay unique
        self._loose: List[Tuple[Any, EncryptionLedger]] = []

    # key material -------------------------------------------------------
    @abstractmethod
    def build_keys(self, params: Dict[str, Any], rng: RngStream) -> Any:
        """Generate scheme key material from params."""

    def public_sections(self, keys: Any) -> Dict[str, bytes]:
        return {}

    def keygen(self, params: Dict[str, Any], seed: bytes) -> KeyBundle:
        keys = self.build_keys(params, RngStream(seed))
        bundle = KeyBundle(self.scheme, dict(params), seed, self.public_sections(keys))
        self._keys[bundle.digest()] = keys
        # a freshly issued key starts with an empty ledger; load() keeps the running count
        self._ledgers.pop(bundle.digest(), None)
        return bundle

    def load(self, bundle: KeyBundle) -> Any:
        """Key material for a bundle, re-derived from (params, seed) and cached."""
        if bundle.scheme != self.scheme:
            raise SchemeMismatch(f"{bundle.scheme.value} key given to {self.scheme.value}")
        digest = bundle.digest()
        if digest not in self._keys:
            keys = self.build_keys(bundle.params, RngStream(bundle.seed))
            if self.public_sections(keys) != bundle.sections:
                raise Corrupt("public key sections do not match the key seed")
            self._keys[digest] = keys
        return self._keys[digest]

    def digest_of(self, keys: Any) -> Optional[str]:
        """Bundle digest under which ``keys`` were generated or loaded."""
        for digest, cached in self._keys.items():
            if cached is keys:
                return digest
        return None

    # encryption ledgers ---------------------------------------------------
    def make_ledger(self, keys: Any) -> Optional[EncryptionLedger]:
        """Fresh ledger for a key, or None when the scheme does not count encryptions."""
        return None

    def ledger(self, keys: Any) -> Optional[EncryptionLedger]:
        """The encryption ledger of a key, shared by every use of the same key bundle."""
        digest = self.digest_of(keys)
        if digest is None:
            for held, ledger in self._loose:
                if held is keys:
                    return ledger
            ledger = self.make_ledger(keys)
            if ledger is not None:
                self._loose.append((keys, ledger))
            return ledger
        if digest not in self._ledgers:
            ledger = self.make_ledger(keys)
            if ledger is None:
                return None
            self._ledgers[digest] = ledger
        return self._ledgers[digest]

    # messages ------------------------------------------------------------
    @abstractmethod
    def parse_message(self, obj: Any, keys: Any) -> Any:
        """JSON value -> scheme plaintext."""

    @abstractmethod
    def format_message(self, message: Any) -> Any:
        """Scheme plaintext -> JSON value."""

    @abstractmethod
    def random_message(self, rng: RngStream, keys: Any) -> Any:
        """Uniform plaintext for tests and vectors."""

    def expected(self, op: str, messages: Sequence[Any], keys: Any) -> Any:
        """Plaintext result an evaluation should decrypt to."""
        raise UnsupportedOp(f"{self.scheme.value} has no plaintext model for {op}")

    def messages_match(self, got: Any, want: Any, keys: Any) -> bool:
        return self.format_message(got) == self.format_message(want)

    # ciphertexts --------------------------------------------------------
    @abstractmethod
    def encrypt_envelope(self, message: Any, keys: Any, rng: RngStream) -> CiphertextEnvelope:
        ...

    @abstractmethod
    def decrypt_envelope(self, envelope: CiphertextEnvelope, keys: Any) -> Any:
        ...

    def evaluate(self, op: str, envelopes: Sequence[CiphertextEnvelope], keys: Any,
                 operand: Any = None) -> CiphertextEnvelope:
        raise UnsupportedOp(f"{op} is not supported by {self.scheme.value}")

    def mult_budget(self, keys: Any) -> Optional[int]:
        """Largest allowed gamma, or None when the scheme does not count multiplications."""
        return None

    # convenience --------------------------------------------------------
    def encrypt(self, message: Any, bundle: KeyBundle, rng: RngStream) -> CiphertextEnvelope:
        return self.encrypt_envelope(message, self.load(bundle), rng)

    def decrypt(self, envelope: CiphertextEnvelope, bundle: KeyBundle) -> Any:
        if envelope.scheme != self.scheme:
            raise SchemeMismatch(f"{envelope.scheme.value} ciphertext given to {self.scheme.value}")
        return self.decrypt_envelope(envelope, self.load(bundle))


_ADAPTERS = {
    SchemeId.ARMKNECHT: ("src.scheme_armknecht", "ArmknechtAdapter"),
    SchemeId.CG_VECTOR: ("src.scheme_challagunta", "VectorAdapter"),
    SchemeId.CG_MATRIX: ("src.scheme_challagunta", "MatrixAdapter"),
    SchemeId.BOGDANOV_LEE: ("src.scheme_bogdanovlee", "BogdanovLeeAdapter"),
    SchemeId.RANK_IDEAL: ("src.scheme_rankideal", "RankIdealAdapter"),
    SchemeId.RANK_IDEAL_ADDITIVE: ("src.scheme_rankideal", "AdditiveRankIdealAdapter"),
    SchemeId.INTPOLY: ("src.scheme_intpoly", "IntPolyAdapter"),
    SchemeId.MVIDEAL: ("src.scheme_mvideal", "MVIdealAdapter"),
    SchemeId.BFV: ("src.scheme_bfv", "BFVAdapter"),
    SchemeId.CKKS: ("src.scheme_ckks", "CKKSAdapter"),
}


@lru_cache(maxsize=None)
def get_adapter(scheme: SchemeId) -> SchemeAdapter:
    """Adapter singleton for a scheme (scheme modules are imported on first use)."""
    module_name, class_name = _ADAPTERS[scheme]
    module = importlib.import_module(module_name)
    return getattr(module, class_name)()


def next_gamma(op: str, gammas: Sequence[int]) -> int:
    """Multiplication-counter law: add takes the max, mult sums, unary ops keep it."""
    if op == "add":
        return max(gammas)
    if op == "mult":
        return sum(gammas)
    return gammas[0]


def eval_dispatch(op: str, cts: Sequence[CiphertextEnvelope], keys: KeyBundle,
                  operand: Any = None) -> CiphertextEnvelope:
    """Apply a homomorphic operation and update envelope metadata.

    ``operand`` carries the plaintext for ptmult or the target level for rescale.
    """
    if op not in OPS:
        raise UnsupportedOp(f"unknown operation {op!r}")
    if not cts:
        raise ParameterError("eval needs at least one ciphertext")
    schemes = {ct.scheme for ct in cts}
    if len(schemes) != 1 or keys.scheme not in schemes:
        raise SchemeMismatch(f"mixed schemes: {sorted(s.value for s in schemes | {keys.scheme})}")
    adapter = get_adapter(keys.scheme)
    if op not in adapter.supported_ops:
        raise UnsupportedOp(f"{op} is not supported by {keys.scheme.value}")
    expected_arity = 2 if op in ("add", "mult") else 1
    if len(cts) != expected_arity:
        raise ParameterError(f"{op} takes {expected_arity} ciphertext(s), got {len(cts)}")

    material = adapter.load(keys)
    gamma = next_gamma(op, [ct.gamma for ct in cts])
    budget = adapter.mult_budget(material)
    if op == "mult" and budget is not None and gamma > budget:
        raise BudgetExceeded(f"gamma {gamma} exceeds the multiplicative budget {budget}")
    result = adapter.evaluate(op, cts, material, operand)
    logger.debug(f"{keys.scheme.value} {op}: gamma {[ct.gamma for ct in cts]} -> {gamma}")
    return result.with_metadata(gamma=gamma)
