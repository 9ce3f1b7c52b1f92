"""Exception and warning types shared across the package."""

from __future__ import annotations


class BowtieError(Exception):
    """Base class for all package-specific errors."""


class ModelFormatError(BowtieError):
    """A model, log, or trace file is structurally malformed.

    Distinct from validation violations: this means the input could not even
    be read into the data model. ``location`` carries "line N" / "line N,
    column M" context when known.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{message} ({location})"
        super().__init__(message)


class SdlParseError(ModelFormatError):
    """Scene description source failed to parse."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(message, location=f"line {line}, column {column}")


class NodeLookupError(BowtieError, LookupError):
    """A node id was not found, or names a node of the wrong kind."""


class IncompleteStateError(BowtieError):
    """A state vector is missing a variable required for evaluation."""

    def __init__(self, variable: str):
        self.variable = variable
        super().__init__(f"state is missing required variable {variable!r}")


class StateDomainError(BowtieError):
    """An assigned state value falls outside its variable's declared domain."""


class DegenerateBaseError(BowtieError):
    """Fusion over multiple factors with a base probability of 0 or 1.

    The product-over-base rule divides by base**(m-1), which is undefined at
    the endpoints once more than one factor is involved.
    """


class DegenerateDataError(BowtieError):
    """Estimation data carries no signal (e.g. every outcome identical).

    ``constant`` holds the smoothed pooled success estimate so callers can
    fall back to a factor-free function if they choose to.
    """

    def __init__(self, message: str, constant: float | None = None):
        self.constant = constant
        super().__init__(message)


class VariableKindError(BowtieError):
    """An estimator was pointed at a variable of the wrong kind."""


class IsolationProtocolError(BowtieError):
    """An episode log does not satisfy the single-threat isolation protocol
    required to attribute barrier outcomes."""


class StreamOrderError(BowtieError):
    """State trace timestamps are not strictly increasing."""


class ConvergenceWarning(UserWarning):
    """An iterative fit stopped at the iteration cap; best iterate returned."""


class UndefinedRateWarning(UserWarning):
    """A rate estimate had zero exposure and was marked undefined (NaN)."""
