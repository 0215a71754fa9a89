"""Deterministic test vectors: emit one JSON file per scheme and check them later.

A vector file is regenerated from (params, seed) alone, so a check both
rebuilds every case and decrypts the stored hex ciphertexts.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from src.config import DESK_PROFILES, FORMAT_VERSION, VECTOR_CASES, VECTORS_DIR
from src.exceptions import Corrupt, HEZooError, VersionMismatch
from src.he_core import (
    CiphertextEnvelope,
    RngStream,
    SchemeAdapter,
    SchemeId,
    eval_dispatch,
    get_adapter,
    seed_from_int,
)

logger = logging.getLogger(__name__)

EVAL_CASE_OPS = ("add", "mult")


@dataclass
class VectorFile:
    scheme: SchemeId
    params: Dict[str, Any]
    seed: bytes
    key_digest: str
    cases: List[Dict[str, Any]] = field(default_factory=list)
    version: int = FORMAT_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "scheme": self.scheme.value,
            "params": self.params,
            "seed": self.seed.hex(),
            "key_digest": self.key_digest,
            "cases": self.cases,
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "VectorFile":
        try:
            version = int(doc["version"])
        except (KeyError, TypeError, ValueError) as exc:
            raise Corrupt(f"vector file without a version: {exc}") from exc
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"vector file version {version}, expected {FORMAT_VERSION}")
        try:
            return cls(scheme=SchemeId(doc["scheme"]), params=dict(doc["params"]), seed=bytes.fromhex(doc["seed"]),
                       key_digest=str(doc["key_digest"]), cases=list(doc["cases"]), version=version)
        except (KeyError, TypeError, ValueError) as exc:
            raise Corrupt(f"malformed vector file: {exc}") from exc

    def save(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path: Path) -> "VectorFile":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise Corrupt(f"{path}: {exc}") from exc
        return cls.from_dict(doc)


def _fresh_adapter(scheme: SchemeId) -> SchemeAdapter:
    # own key cache and encryption ledgers, so every generation starts from zero
    return type(get_adapter(scheme))()


def _case(op: str, adapter: SchemeAdapter, keys: Any, messages: List[Any],
          envelope: Optional[CiphertextEnvelope] = None, error: Optional[HEZooError] = None) -> Dict[str, Any]:
    case = {"op": op, "messages": [adapter.format_message(m) for m in messages]}
    if error is not None:
        case["expected_error"] = error.code
        return case
    case["ciphertext"] = envelope.to_bytes().hex()
    case["expected_ciphertext_digest"] = envelope.digest()
    try:
        case["expected_plaintext"] = adapter.format_message(adapter.decrypt_envelope(envelope, keys))
    except HEZooError as exc:
        case["expected_error"] = exc.code
    return case


def generate(scheme: SchemeId, params: Dict[str, Any], seed: bytes, n_cases: int = VECTOR_CASES) -> VectorFile:
    """Build a vector file: ``n_cases`` fresh encryptions plus one case per supported binary op."""
    adapter = _fresh_adapter(scheme)
    bundle = adapter.keygen(params, seed)
    keys = adapter.load(bundle)
    rng = RngStream(seed).fork("vectors")
    vectors = VectorFile(scheme=scheme, params=dict(params), seed=seed, key_digest=bundle.digest())

    for _ in range(n_cases):
        message = adapter.random_message(rng, keys)
        vectors.cases.append(_case("encrypt", adapter, keys, [message], adapter.encrypt_envelope(message, keys, rng)))

    for op in EVAL_CASE_OPS:
        if op not in adapter.supported_ops:
            continue
        messages = [adapter.random_message(rng, keys) for _ in range(2)]
        cts = [adapter.encrypt_envelope(m, keys, rng) for m in messages]
        try:
            result = eval_dispatch(op, cts, bundle)
        except HEZooError as exc:
            vectors.cases.append(_case(op, adapter, keys, messages, error=exc))
            continue
        vectors.cases.append(_case(op, adapter, keys, messages, result))
    logger.info(f"{scheme.value}: {len(vectors.cases)} vector cases, key {bundle.digest()[:12]}")
    return vectors


def emit(schemes: Iterable[SchemeId], seed: int, out_dir: Path = VECTORS_DIR,
         profiles: Optional[Dict[str, Dict[str, Any]]] = None, n_cases: int = VECTOR_CASES) -> List[Path]:
    profiles = profiles or DESK_PROFILES
    paths = []
    for scheme in schemes:
        vectors = generate(scheme, profiles[scheme.value], seed_from_int(seed), n_cases)
        paths.append(vectors.save(Path(out_dir) / f"{scheme.value}.json"))
    return paths


def check(path: Path) -> List[Dict[str, Any]]:
    """Regenerate a vector file and compare it case by case.

    Returns:
        list of mismatches; empty when the file checks out.
    """
    stored = VectorFile.load(path)
    fresh = generate(stored.scheme, stored.params, stored.seed, sum(c["op"] == "encrypt" for c in stored.cases))
    mismatches = []

    if fresh.key_digest != stored.key_digest:
        mismatches.append({"case": None, "field": "key_digest", "expected": stored.key_digest,
                           "got": fresh.key_digest})
    if len(fresh.cases) != len(stored.cases):
        mismatches.append({"case": None, "field": "cases", "expected": len(stored.cases), "got": len(fresh.cases)})

    adapter = _fresh_adapter(stored.scheme)
    keys = adapter.load(adapter.keygen(stored.params, stored.seed))
    for index, (want, got) in enumerate(zip(stored.cases, fresh.cases)):
        for name in ("op", "messages", "expected_ciphertext_digest", "expected_plaintext", "expected_error"):
            if want.get(name) != got.get(name):
                mismatches.append({"case": index, "field": name, "expected": want.get(name), "got": got.get(name)})
        if "ciphertext" in want and "expected_plaintext" in want:
            try:
                envelope = CiphertextEnvelope.from_bytes(bytes.fromhex(want["ciphertext"]))
                decrypted = adapter.format_message(adapter.decrypt_envelope(envelope, keys))
            except (HEZooError, ValueError) as exc:
                decrypted = f"error: {exc}"
            if decrypted != want["expected_plaintext"]:
                mismatches.append({"case": index, "field": "stored ciphertext", "expected": want["expected_plaintext"],
                                   "got": decrypted})

    if mismatches:
        logger.warning(f"{path}: {len(mismatches)} mismatches")
    else:
        logger.info(f"{path}: {len(stored.cases)} cases match")
    return mismatches
