"""Exception hierarchy shared across claimforge."""


class ClaimForgeError(Exception):
    """Base class for all claimforge errors."""


# --- claim parsing ---

class EmptyInputError(ClaimForgeError):
    """Raw claim block contained no text."""


class EmptyClaimError(ClaimForgeError):
    """A claim body was empty after trimming."""


class NonMonotonicNumbersError(ClaimForgeError):
    """Claim numbers in a block were not strictly increasing."""


class DanglingDependencyError(ClaimForgeError):
    """A claim depends on a number >= its own or absent from the block."""


# --- corpus building ---

class ApiUnavailableError(ClaimForgeError):
    """Network/HTTP failure persisted through all retries."""


class NoMatchError(ClaimForgeError):
    """An inventor query matched zero inventors."""


class RateLimitedError(ClaimForgeError):
    """Server kept rate limiting; carries the server's retry-after hint."""

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class IoError(ClaimForgeError):
    """File could not be read or written, or was truncated/corrupt."""


class SchemaVersionMismatchError(ClaimForgeError):
    """Persisted file carries an unsupported schema version."""


# --- dataset building ---

class MissingParentError(ClaimForgeError):
    """Dependent claim whose parent is absent from the record set."""


class EmptyCorpusError(ClaimForgeError):
    """No usable text to train on."""


class UnknownIdError(ClaimForgeError):
    """Token id outside the vocabulary."""


class TooFewPatentsError(ClaimForgeError):
    """Fewer than two distinct patents; cannot split train/val."""


# --- neural models ---

class InvalidConfigError(ClaimForgeError):
    """Model or training config violates its invariants."""


class SequenceTooLongError(ClaimForgeError):
    """Input sequence exceeds the model context length."""


class EmptySequenceError(ClaimForgeError):
    """Forward pass called on an empty sequence."""


class VocabMismatchError(ClaimForgeError):
    """Dataset/checkpoint tokenized under a different vocabulary."""


class VocabHashMismatchError(VocabMismatchError):
    """Checkpoint used with a vocabulary other than the one it was trained with."""


class LabelOutOfRangeError(ClaimForgeError):
    """Label index not valid for the classifier's label count."""


# --- generation ---

class InfeasibleConstraintsError(ClaimForgeError):
    """No candidate survived constraint filtering within the sampling budget."""


class ContextTooLongError(ClaimForgeError):
    """Request cannot fit context plus generation budget in the model window."""


class NoBridgeFoundError(ClaimForgeError):
    """No forward/backward overlap found within the token budget."""


class ModelNotLoadedError(ClaimForgeError):
    """No checkpoint loaded for the requested direction or mode."""


# --- measurement ---

class EmptyTextError(ClaimForgeError):
    """Classification requested for empty text."""


class EmptyDistributionError(ClaimForgeError):
    """Label distribution with all-zero counts where counts are required."""


# --- experiment harness ---

class EmptySelectionError(ClaimForgeError):
    """Set selector matched no patent records."""


class TooFewCheckpointsError(ClaimForgeError):
    """Trend analysis needs at least two checkpoints."""


class ResumeMismatchError(ClaimForgeError):
    """Run directory was produced by a different experiment spec."""
