"""Exception hierarchy shared across the package.

Every failure mode surfaced to callers derives from SemiflowError so the
service and CLI layers can map them to diagnostics uniformly.
"""

from __future__ import annotations


class SemiflowError(Exception):
    """Base class for all package-specific failures."""


class ParameterDomainError(SemiflowError, ValueError):
    """A parameter or argument lies outside its mathematical domain."""


class GridError(SemiflowError, ValueError):
    """Age-grid construction failed validation (shape or tail-mass bound)."""


class NoEndemicEquilibriumError(SemiflowError):
    """Requested the endemic state in the extinction regime (R0 <= 1)."""


class NumericalFailureError(SemiflowError):
    """A simulation produced NaN or overflow; carries step diagnostics."""

    def __init__(self, message: str, *, step: int | None = None, time: float | None = None):
        super().__init__(message)
        self.step = step
        self.time = time


class ContourResolutionError(SemiflowError):
    """Winding-number quadrature failed to resolve; carries diagnostics."""

    def __init__(self, message: str, *, min_abs: float | None = None, location: complex | None = None):
        super().__init__(message)
        self.min_abs = min_abs
        self.location = location


class InapplicableReductionError(SemiflowError):
    """A closed-form reduction was requested outside its validity branch."""


class FitDataError(SemiflowError, ValueError):
    """Sample data is degenerate (rank-deficient) or malformed."""


class ConfigError(SemiflowError, ValueError):
    """Config parsing or validation failed; names the key and line."""

    def __init__(self, message: str, *, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line

    def record(self) -> str:
        """Single-line machine-parsable rendering."""
        parts = ["error kind=config"]
        if self.key is not None:
            parts.append(f"key={self.key}")
        if self.line is not None:
            parts.append(f"line={self.line}")
        parts.append(f"message={self.args[0]}")
        return " ".join(parts)


_ERROR_KINDS = (
    (ConfigError, "config"),
    (GridError, "grid"),
    (ParameterDomainError, "domain"),
    (NoEndemicEquilibriumError, "no-endemic-equilibrium"),
    (NumericalFailureError, "numerical"),
    (ContourResolutionError, "contour"),
    (InapplicableReductionError, "inapplicable"),
    (FitDataError, "fit-data"),
)


def error_kind(exc: Exception) -> str:
    """Short machine-readable tag for a failure class."""
    for cls, kind in _ERROR_KINDS:
        if isinstance(exc, cls):
            return kind
    return "internal" if isinstance(exc, SemiflowError) else "unexpected"


def error_record(exc: Exception) -> str:
    """Single-line machine-parsable rendering of any failure.

    The message is the last field, so it may contain spaces and '='
    without breaking field extraction for the fields before it.
    """
    if isinstance(exc, ConfigError):
        return exc.record()
    return f"error kind={error_kind(exc)} message={exc}"
