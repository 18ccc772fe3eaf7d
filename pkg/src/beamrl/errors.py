"""Exception types shared across the simulator."""


class BeamrlError(Exception):
    """Base class for all package errors."""


class DomainError(BeamrlError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ShapeError(BeamrlError, ValueError):
    """Array dimensions do not match the operation's contract."""


class ConfigError(BeamrlError, ValueError):
    """Invalid or inconsistent experiment configuration."""


class SingularMatrixError(BeamrlError, ValueError):
    """A matrix is rank deficient or too ill-conditioned to invert."""


class NotReadyError(BeamrlError, RuntimeError):
    """An operation was called before its required history/warm-up exists."""


class CompletenessError(BeamrlError, ValueError):
    """A per-stream map is missing entries for some streams."""
