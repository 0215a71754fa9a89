"""Error taxonomy for he-zoo.

Every error exposes a stable ``code`` (its class name) which the CLI writes into
its machine-readable stderr record.
"""


class HEZooError(Exception):
    """Base class for every error raised by the library."""

    @property
    def code(self) -> str:
        return type(self).__name__


class ParameterError(HEZooError, ValueError):
    """Parameters violate a scheme or construction constraint."""


class MessageError(HEZooError, ValueError):
    """Plaintext is malformed for the scheme (length, range, alphabet)."""


class UnsupportedOp(HEZooError):
    """Operation not offered by the scheme or not valid for the ciphertext arity."""


class BudgetExceeded(HEZooError):
    """Multiplication would push the counter past the multiplicative budget."""


class SchemeMismatch(HEZooError):
    """Envelopes or keys of different schemes were combined."""


class Corrupt(HEZooError, ValueError):
    """Serialized bytes are truncated or structurally invalid."""


class VersionMismatch(HEZooError, ValueError):
    """Serialized bytes carry an unknown format version."""


class Inconsistent(HEZooError):
    """Linear system has no solution."""


class AmbiguousAtY(HEZooError):
    """Interpolated value at the evaluation point is not determined."""


class DecodeAmbiguous(HEZooError):
    """A majority vote tied during Reed decoding."""


class DecodeFailure(HEZooError):
    """Decoded word lies outside the unique-decoding radius."""


class NotInCode(HEZooError):
    """Word is not in the row space of the generator matrix."""


class NoAnnihilator(HEZooError):
    """No annihilating combination exists for the secret rows."""


class RetriesExhausted(HEZooError):
    """A rejection-sampling loop hit its retry bound."""


class GammaExceeded(HEZooError):
    """Ciphertext multiplication counter is above the decryptable budget."""


class EncryptionBudgetExceeded(HEZooError):
    """The key already produced its allowed number of encryptions."""


class LevelMismatch(HEZooError):
    """Ciphertexts sit at different modulus-chain levels."""


class LevelExhausted(HEZooError):
    """Requested level is below the bottom of the modulus chain."""


class NoParamsFound(HEZooError):
    """Parameter search found nothing inside its bounds."""


INPUT_ERRORS = (Corrupt, VersionMismatch, ParameterError, MessageError)
