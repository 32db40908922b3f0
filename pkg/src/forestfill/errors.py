"""Exception types raised across the package.

Every error that callers are expected to handle derives from
:class:`ForestfillError`, so ``except ForestfillError`` catches any
domain failure while programming mistakes (TypeError and friends)
propagate unchanged.
"""

from __future__ import annotations


class ForestfillError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidInput(ForestfillError):
    """An argument violates a documented precondition."""


class ShapeError(InvalidInput):
    """Array dimensions do not line up."""


class UnimputableColumn(ForestfillError):
    """A column has no observed values, so nothing can be learned for it."""

    def __init__(self, column: int, name: str | None = None):
        self.column = column
        self.name = name
        label = f"{name!r} (index {column})" if name is not None else f"index {column}"
        super().__init__(f"column {label} has no observed values")


class FactorizationFailure(ForestfillError):
    """Cholesky factorization hit a non-positive-definite pivot."""

    def __init__(self, pivot: int, value: float):
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"covariance matrix is not positive definite: pivot {pivot} = {value:.6g}"
        )


class OobUnavailable(ForestfillError):
    """No training row was ever out-of-bag, so no OOB error exists."""


class DegenerateDiff(ForestfillError):
    """The convergence-difference denominator is zero."""


class ImputationFailure(ForestfillError):
    """The imputation loop could not produce a result."""


class AmputationFailure(ForestfillError):
    """Missingness could not be generated for the requested setup."""


class ZeroDenominator(ForestfillError):
    """A ratio metric was asked to divide by an exact zero."""


class SingularDesign(ForestfillError):
    """The regression design matrix is rank deficient."""


class DegenerateNrmse(ForestfillError):
    """The masked true values have zero variance."""


class DegenerateCorrelation(ForestfillError):
    """One of the correlated vectors is constant."""


class CsvParseError(ForestfillError):
    """A CSV file violates the expected numeric-table format.

    ``row`` and ``column`` are 1-based; the header line is row 1.
    """

    def __init__(self, row: int, column: int, detail: str):
        self.row = row
        self.column = column
        super().__init__(f"CSV parse error at row {row}, column {column}: {detail}")


class ConfigError(ForestfillError):
    """A study configuration file is malformed or inconsistent."""


class StudyFailure(ForestfillError):
    """Too many replicates failed for the study to be trusted."""

    def __init__(self, n_failed: int, n_total: int):
        self.n_failed = n_failed
        self.n_total = n_total
        super().__init__(
            f"{n_failed} of {n_total} replicates failed (threshold is 1%)"
        )
