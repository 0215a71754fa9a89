"""Input preparation for the CLI: params, messages, seeds and ciphertext files."""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, Optional, Union

from src.config import SEED_BYTES, load_profile
from src.exceptions import Corrupt, ParameterError
from src.he_core import CiphertextEnvelope, KeyBundle, SchemeId, seed_from_int

logger = logging.getLogger(__name__)

_INT_PATTERN = re.compile(r"^[+-]?\d+$")
_FLOAT_PATTERN = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")
_HEX_SEED_PATTERN = re.compile(rf"^(0x)?[0-9a-fA-F]{{{2 * SEED_BYTES}}}$")


def read_json(path: Union[str, Path]) -> Any:
    """Parse a JSON file; syntax errors become Corrupt."""
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise Corrupt(f"{path}: invalid JSON ({exc})") from exc


def coerce_param_value(value: Any) -> Any:
    """Turn numeric and boolean strings into numbers and booleans.

    Lists and nested dicts are coerced element-wise; anything else is returned as is.
    """
    if isinstance(value, dict):
        return {k: coerce_param_value(v) for k, v in value.items()}
    if isinstance(value, list):
        return [coerce_param_value(v) for v in value]
    if not isinstance(value, str):
        return value
    text = value.strip()
    if text.lower() in ("true", "yes"):
        return True
    if text.lower() in ("false", "no"):
        return False
    if _INT_PATTERN.match(text):
        return int(text)
    if _FLOAT_PATTERN.match(text):
        return float(text)
    return text


def load_params(scheme: SchemeId, path: Optional[Union[str, Path]] = None,
                profile: Optional[str] = None) -> Dict[str, Any]:
    """Scheme parameters from a JSON file, or the active profile when no file is given.

    A file may hold the parameters directly or a profile-shaped document keyed
    by scheme id.
    """
    if path is None:
        profiles = load_profile(profile)
        if scheme.value not in profiles:
            raise ParameterError(f"profile has no entry for {scheme.value}")
        return dict(profiles[scheme.value])

    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ParameterError(f"{path}: parameters must be a JSON object")
    if scheme.value in doc and isinstance(doc[scheme.value], dict):
        doc = doc[scheme.value]
    params = coerce_param_value(doc)
    logger.info(f"Loaded {scheme.value} parameters from {path}: {sorted(params)}")
    return params


def parse_seed(text: Union[str, int]) -> bytes:
    """Seed bytes from a decimal integer or a 64-digit hex string."""
    if isinstance(text, int) and not isinstance(text, bool):
        return seed_from_int(text)
    text = str(text).strip()
    if _HEX_SEED_PATTERN.match(text):
        return bytes.fromhex(text[2:] if text.startswith("0x") else text)
    if _INT_PATTERN.match(text):
        value = int(text)
        if value >= 2 ** (8 * SEED_BYTES):
            raise ParameterError(f"seed {value} does not fit in {SEED_BYTES} bytes")
        return seed_from_int(value)
    raise ParameterError(f"seed must be a non-negative integer or {2 * SEED_BYTES} hex digits, got {text!r}")


def load_message(text: Optional[str] = None, path: Optional[Union[str, Path]] = None) -> Any:
    """Plaintext JSON value from an inline string or a file."""
    if (text is None) == (path is None):
        raise ParameterError("give exactly one of an inline message or a message file")
    if path is not None:
        return read_json(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise Corrupt(f"message is not valid JSON: {exc}") from exc


def format_envelope(envelope: CiphertextEnvelope, fmt: str = "json") -> str:
    """Render a ciphertext as hex or as a JSON document carrying the hex bytes."""
    data = envelope.to_bytes().hex()
    if fmt == "hex":
        return data
    return json.dumps({
        "scheme": envelope.scheme.value,
        "gamma": envelope.gamma,
        "level": envelope.level,
        "arity": envelope.arity,
        "digest": envelope.digest(),
        "envelope": data,
    }, sort_keys=True)


def parse_envelope(text: str) -> CiphertextEnvelope:
    """Inverse of :func:`format_envelope`; the format is detected from the content."""
    text = text.strip()
    if text.startswith("{"):
        try:
            doc = json.loads(text)
            data = doc["envelope"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise Corrupt(f"malformed ciphertext document: {exc}") from exc
    else:
        data = text
    try:
        raw = bytes.fromhex(data)
    except (ValueError, TypeError) as exc:
        raise Corrupt(f"ciphertext is not valid hex: {exc}") from exc
    return CiphertextEnvelope.from_bytes(raw)


def write_key_bundle(bundle: KeyBundle, path: Union[str, Path], fmt: str = "json") -> Path:
    """Write a key file as bare hex or as a JSON document carrying the hex bytes."""
    path = Path(path)
    data = bundle.to_bytes().hex()
    if fmt == "hex":
        path.write_text(data + "\n")
    else:
        path.write_text(json.dumps({
            "scheme": bundle.scheme.value,
            "params": bundle.params,
            "digest": bundle.digest(),
            "key": data,
        }, sort_keys=True, indent=2) + "\n")
    logger.info(f"Saved {bundle.scheme.value} key {bundle.digest()[:16]} to {path}")
    return path


def read_key_bundle(path: Union[str, Path]) -> KeyBundle:
    """Key file written by :func:`write_key_bundle`, in either format."""
    text = Path(path).read_text().strip()
    if text.startswith("{"):
        try:
            data = json.loads(text)["key"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise Corrupt(f"{path}: malformed key document: {exc}") from exc
    else:
        data = text
    try:
        raw = bytes.fromhex(data)
    except (ValueError, TypeError) as exc:
        raise Corrupt(f"{path}: key is not valid hex: {exc}") from exc
    return KeyBundle.from_bytes(raw)


def ledger_path(key_path: Union[str, Path]) -> Path:
    """Sidecar file holding the encryption count of a key file."""
    key_path = Path(key_path)
    return key_path.with_name(key_path.name + ".ledger")


def read_ledger_count(key_path: Union[str, Path], digest: str) -> int:
    """Encryptions already made under the key at ``key_path``; 0 when none are recorded."""
    path = ledger_path(key_path)
    if not path.exists():
        return 0
    try:
        doc = json.loads(path.read_text())
        recorded, count = doc["key_digest"], int(doc["count"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise Corrupt(f"{path}: malformed encryption ledger: {exc}") from exc
    if recorded != digest:
        logger.warning(f"{path} belongs to key {str(recorded)[:16]}, not {digest[:16]}; starting from 0")
        return 0
    return count


def write_ledger_count(key_path: Union[str, Path], digest: str, count: int) -> Path:
    path = ledger_path(key_path)
    path.write_text(json.dumps({"key_digest": digest, "count": int(count)}, sort_keys=True) + "\n")
    return path
