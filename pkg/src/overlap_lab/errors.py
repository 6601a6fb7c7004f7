"""Exception taxonomy with machine-readable categories.

Every error raised by this package carries a short ``category`` slug that the
CLI maps to a stable nonzero exit code and a JSON error document, so callers
can dispatch on failures without parsing messages.
"""

from __future__ import annotations


class OverlapLabError(Exception):
    """Base class for all package errors."""

    category = "internal"


class InvalidConfigError(OverlapLabError):
    category = "invalid-config"


class SchemaMismatchError(OverlapLabError):
    category = "schema-mismatch"


class DataParseError(OverlapLabError):
    """Malformed cell or value in an input file; message names row/column."""

    category = "parse-error"


class SingularCovarianceError(OverlapLabError):
    """Shared covariance not invertible.

    Deliberately not smoothed away: a singular averaged covariance is the
    orthogonality-suspect regime and must surface to the caller.
    """

    category = "singular-covariance"


class SeparationError(OverlapLabError):
    """Perfect separation in the propensity model (a positivity violation)."""

    category = "separation-detected"


class MissingGroupError(OverlapLabError):
    category = "missing-group"


class EmptyMarginError(OverlapLabError):
    category = "empty-margin"


class OracleUnavailableError(OverlapLabError):
    category = "oracle-unavailable"


class DivisionHazardError(OverlapLabError):
    category = "division-hazard"


class UnstableEstimandError(OverlapLabError):
    category = "unstable-estimand"


class SingleClassError(OverlapLabError):
    category = "single-class"


class UnsupportedModelError(OverlapLabError):
    category = "unsupported"


class OutputError(OverlapLabError):
    category = "io-error"


#: Stable exit codes for the CLI, one per category (0 = success, 1 = internal).
EXIT_CODES = {
    "internal": 1,
    "invalid-config": 2,
    "schema-mismatch": 3,
    "parse-error": 4,
    "singular-covariance": 5,
    "separation-detected": 6,
    "missing-group": 7,
    "empty-margin": 8,
    "oracle-unavailable": 9,
    "division-hazard": 10,
    "unstable-estimand": 11,
    "single-class": 12,
    "io-error": 13,
    "unsupported": 14,
}
