"""
Custom exception hierarchy for Ordinal Embedding Tool.
Provides unified error handling throughout the library and the CLI.
"""

from typing import Any, Dict, Optional


class OrdinalEmbeddingException(Exception):
    """Base class for all Ordinal Embedding Tool exceptions."""

    default_detail = "Ordinal embedding error"

    def __init__(self, detail: Optional[str] = None):
        self.detail = detail or self.default_detail
        super().__init__(self.detail)


class DomainException(OrdinalEmbeddingException):
    """Raised when a domain is invalid or too degenerate to sample."""

    default_detail = "Invalid or degenerate domain"


class DegenerateInputException(OrdinalEmbeddingException):
    """Raised for coincident points, rank deficiency or zero variance."""

    default_detail = "Degenerate input configuration"


class IllConditionedException(DegenerateInputException):
    """Raised when trilateration anchors are (numerically) affinely dependent."""

    default_detail = "Ill-conditioned anchors"


class DimensionException(OrdinalEmbeddingException):
    """Raised when a requested construction does not fit the ambient dimension."""

    default_detail = "Dimension mismatch"


class InapplicableException(OrdinalEmbeddingException):
    """Raised when the precondition of a geometric certificate does not hold."""

    default_detail = "Precondition not met"


class DesignException(OrdinalEmbeddingException):
    """Raised for invalid comparison design parameters."""

    default_detail = "Invalid comparison design"


class InsufficientLandmarksException(DesignException):
    """Raised when a landmark design has fewer than d+1 landmarks."""

    default_detail = "Not enough landmarks for the target dimension"


class DesignSizeException(OrdinalEmbeddingException):
    """Raised when materialization or exhaustive enumeration exceeds its guard."""

    default_detail = "Design too large to materialize"


class EmbeddingTimeoutException(OrdinalEmbeddingException):
    """Raised when rejection sampling exhausts its draw budget."""

    default_detail = "Draw budget exhausted"

    def __init__(self, draws: int, detail: Optional[str] = None):
        self.draws = draws
        super().__init__(detail or f"{self.default_detail} after {draws} draws")


class NumericException(OrdinalEmbeddingException):
    """Raised when an optimizer produces non-finite values."""

    default_detail = "Non-finite values during optimization"

    def __init__(
        self, detail: Optional[str] = None, diagnostics: Optional[Dict[str, Any]] = None
    ):
        self.diagnostics = diagnostics or {}
        super().__init__(detail)


class ExperimentException(OrdinalEmbeddingException):
    """Raised when an experiment cannot produce usable records."""

    default_detail = "Experiment failed"


class ConfigException(OrdinalEmbeddingException):
    """Raised for unreadable or invalid configuration."""

    default_detail = "Invalid configuration"
