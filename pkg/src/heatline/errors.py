"""Exception hierarchy.

Configuration problems (bad input, mismatched dimensions) and numerical
failures (truncation too small, ill-posed reconstruction) are kept apart so
the CLI can map them to distinct exit codes.
"""

from __future__ import annotations


class HeatlineError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HeatlineError, ValueError):
    """Inconsistent or malformed input: unknown labels, dimension mismatch."""


class ValidationError(HeatlineError, ValueError):
    """An operator or parameter violates its defining invariant."""


class NumericalError(HeatlineError, RuntimeError):
    """A computation cannot be carried out reliably with the given settings."""


class CutoffError(NumericalError):
    """The Fock-space truncation is too small for the requested state or evolution."""

    def __init__(self, message: str, minimal_cutoff: int | None = None):
        super().__init__(message)
        self.minimal_cutoff = minimal_cutoff


class IllPosedGridError(NumericalError):
    """The sampling grid does not determine the heat distribution."""
