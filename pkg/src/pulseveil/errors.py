"""Exception hierarchy shared by the whole package.

Every raised error carries a short machine-readable ``code`` (kebab-case)
so the CLI can emit structured error JSON and map the failure to an exit
status: data problems exit 3, numeric degeneracies exit 4.
"""

from __future__ import annotations


class PulseVeilError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    def __init__(self, message: str, *, code: str = "error"):
        super().__init__(message)
        self.code = code

    def to_json(self) -> dict:
        return {"error": {"code": self.code, "message": str(self)}}


class DataError(PulseVeilError):
    """Malformed, missing or inconsistent input data."""

    exit_code = 3


class NumericError(PulseVeilError):
    """Numerically degenerate input (zero variance, zero mean, band above Nyquist...)."""

    exit_code = 4
