from __future__ import annotations

import typing as t


class RankCFError(Exception):
    """Raised if anything goes wrong while estimating. This is the base
    for all exceptions that rankcf defines.
    """

    #: Process exit status the command line interface uses when this
    #: error reaches it.
    exit_code: t.ClassVar[int] = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return self.message


class ConfigError(RankCFError):
    """Raised if a configuration record or option value is invalid."""

    exit_code = 4


class DomainError(RankCFError, ValueError):
    """Raised if an argument lies outside the domain of an operation,
    for example a probability outside ``(0, 1)`` or an empty input.
    """

    exit_code = 4


class ShapeError(RankCFError, ValueError):
    """Raised if the lengths or shapes of the inputs don't agree."""

    exit_code = 2


class UnsupportedOperationError(RankCFError):
    """Raised if an operation is not defined for the given family, such
    as the quantile of the identity control or the closed form ASF for
    a logit link.
    """

    exit_code = 4


class NumericalError(RankCFError):
    """Base for failures of the numerical procedures themselves."""

    exit_code = 3


class SingularDesignError(NumericalError):
    """Raised if a first stage design matrix does not have full column
    rank.
    """

    def __init__(self, message: str, condition: float):
        super().__init__(message)

        #: Condition number of the design that triggered the error.
        self.condition = condition


class CollinearityError(NumericalError):
    """Raised if the augmented design ``W = (Z, D, eta)`` is collinear.
    This is the signal that identification failed, which happens when
    the first stage is linear and the residual distribution matches the
    quantile family.
    """

    def __init__(self, message: str, condition: float):
        super().__init__(message)

        #: Condition number of the column-equilibrated design.
        self.condition = condition


class BandwidthError(NumericalError):
    """Raised if a kernel bandwidth leaves too few effective
    observations at some evaluation point.
    """

    def __init__(
        self, message: str, bandwidth: float, effective_size: float | None = None
    ):
        super().__init__(message)
        self.bandwidth = bandwidth

        #: Smallest effective local sample size that was found, if it
        #: was computed.
        self.effective_size = effective_size


class DegenerateTrimError(NumericalError):
    """Raised if trimming removes every observation."""


class UnreliableBootstrapError(NumericalError):
    """Raised if too many bootstrap replications failed to produce an
    estimate.
    """

    def __init__(self, message: str, b_used: int, b_failed: int):
        super().__init__(message)
        self.b_used = b_used
        self.b_failed = b_failed


class CovarianceError(NumericalError):
    """Raised if a covariance matrix is not symmetric positive
    semidefinite.
    """


class DataError(RankCFError):
    """Base for problems with input data files."""

    exit_code = 2


class SchemaError(DataError):
    """Raised if columns referenced by the schema are missing."""

    def __init__(self, message: str, missing: t.Sequence[str] = ()):
        super().__init__(message)

        #: Names of the referenced columns that were not found.
        self.missing: list[str] = list(missing)


class ParseError(DataError):
    """Raised if a value in a data file can't be used. ``row`` is the
    1-based data row, not counting the header.
    """

    def __init__(
        self,
        message: str,
        row: int | None = None,
        column: str | None = None,
        original_error: Exception | None = None,
    ):
        super().__init__(message)
        self.row = row
        self.column = column

        #: If available, the error that indicates why the value was not
        #: valid. This might be ``None``.
        self.original_error: Exception | None = original_error
