"""Exception hierarchy shared by all spacing-ncd modules."""


class SpacingNCDError(Exception):
    """Base class for all errors raised by this package."""


class DegeneratePrototypesError(SpacingNCDError):
    """All prototype vectors coincide, so no distance scale can be derived."""


class InvalidAlphaError(SpacingNCDError):
    """The dissimilarity scale factor must be strictly greater than 1."""


class DimensionMismatchError(SpacingNCDError):
    """Array shapes are inconsistent with each other."""


class UnsupportedWeightsError(SpacingNCDError):
    """The closed-form update only supports uniform off-diagonal weights."""


class TooFewSamplesError(SpacingNCDError):
    """Fewer samples than requested clusters."""


class InvalidLabelError(SpacingNCDError):
    """A class label lies outside the valid index range."""


class ZeroLatentError(SpacingNCDError):
    """A latent row has zero norm, so its direction is undefined."""


class LengthMismatchError(SpacingNCDError):
    """Two label sequences have different lengths."""


class StaleCacheError(SpacingNCDError):
    """A backward pass was given a cache from a mismatched forward pass."""


class NonFiniteLossError(SpacingNCDError):
    """A training loss became NaN or infinite."""


class ConfigError(SpacingNCDError):
    """A configuration value violates its documented constraints."""


class ParseError(SpacingNCDError):
    """A data file row could not be parsed.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(SpacingNCDError):
    """A data file header does not match the expected schema."""


class SeparationInfeasibleError(SpacingNCDError):
    """Rejection sampling could not place class means far enough apart."""


class MissingSidecarError(SpacingNCDError):
    """Ground-truth sidecar file required for evaluation is absent."""
