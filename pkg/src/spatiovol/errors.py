"""Exception and warning types raised across the package."""

from __future__ import annotations


class SpatioVolError(Exception):
    """Base class for all package errors."""


class ParseError(SpatioVolError, ValueError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column


class GapError(ParseError):
    """A missing cell in an input panel."""


class SingularDesignError(SpatioVolError):
    pass


class DegenerateSeriesError(SpatioVolError, ValueError):
    pass


class FitError(SpatioVolError):
    pass


class ConvergenceError(FitError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class NonFiniteObjectiveError(FitError, ValueError):
    pass


class InstrumentRankError(FitError):
    pass


class ZeroDistanceError(SpatioVolError, ValueError):
    def __init__(self, i: int, j: int, labels=None):
        names = (labels[i], labels[j]) if labels is not None else (i, j)
        super().__init__(f"zero distance between {names[0]} and {names[1]}; inverse weight undefined")
        self.pair = (i, j)


class AsymmetryError(SpatioVolError, ValueError):
    pass


class SingularMatrixError(SpatioVolError, ArithmeticError):
    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


class PDFailure(SpatioVolError, ArithmeticError):
    """Matrix is not positive definite."""


NonPDError = PDFailure


class DomainError(SpatioVolError, ValueError):
    pass


class StateError(SpatioVolError):
    def __init__(self, message: str, records=None):
        super().__init__(message)
        self.records = records or []


class ZeroVarianceError(SpatioVolError, ArithmeticError):
    pass


class InvalidParamError(SpatioVolError, ValueError):
    pass


class ConfigError(SpatioVolError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class StationarityBoundaryWarning(UserWarning):
    pass


class ZeroRowWarning(UserWarning):
    pass


class StateWarning(UserWarning):
    pass
