"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(EngineError):
    """Bad command-line invocation."""


class UaiFormatError(EngineError):
    """Malformed network or evidence text."""


class InconsistentModelError(EngineError):
    """The joint distribution has zero total mass."""


class InconsistentEvidenceError(InconsistentModelError):
    """Evidence contradicts the support of some factor."""


class InferenceTimeoutError(EngineError):
    """The configured wall-clock budget was exhausted."""


class ResourceLimitError(EngineError):
    """A dense truth table would exceed the configured memory cap."""


class IndexOverflowError(EngineError):
    """Assignment indices for this scope do not fit in 64-bit integers."""


class CoverInfeasibleError(EngineError):
    """A bag variable is not covered by any candidate edge."""


class OracleGuardError(EngineError):
    """The model is too large for brute-force enumeration."""
