from __future__ import annotations

import dataclasses
import io
import logging
import os
import typing as t

import numpy as np
import pandas as pd

from .exc import ParseError
from .exc import SchemaError
from .exc import ShapeError

logger = logging.getLogger(__name__)

_TRUE = frozenset({"1", "1.0", "true", "t", "yes"})
_FALSE = frozenset({"0", "0.0", "false", "f", "no"})

#: Name given to the prepended intercept column.
INTERCEPT = "const"


@dataclasses.dataclass(frozen=True, eq=False)
class Dataset:
    """A binary outcome sample.

    :param y: Outcome vector of zeros and ones, length ``n``.
    :param z: Exogenous regressors, ``n x k``. The first column is the
        constant ``1``.
    :param d: Endogenous regressors, ``n x p``. A 1-d array is taken as a
        single endogenous column.
    :param exog_names: Column names of ``z``.
    :param endog_names: Column names of ``d``.
    :param outcome_name: Name of the outcome column.
    """

    y: np.ndarray
    z: np.ndarray
    d: np.ndarray
    exog_names: tuple[str, ...] = ()
    endog_names: tuple[str, ...] = ()
    outcome_name: str = "y"

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        d = np.asarray(self.d, dtype=float)

        if d.ndim == 1:
            d = d[:, None]

        if z.ndim == 1:
            z = z[:, None]

        if y.ndim != 1 or z.ndim != 2 or d.ndim != 2:
            raise ShapeError("Expected a vector y and matrices z and d.")

        n = y.shape[0]

        if z.shape[0] != n or d.shape[0] != n:
            raise ShapeError(
                f"Row counts differ: y has {n}, z has {z.shape[0]},"
                f" d has {d.shape[0]}."
            )

        if not (np.isfinite(y).all() and np.isfinite(z).all() and np.isfinite(d).all()):
            raise ShapeError("Dataset contains non-finite values.")

        if not np.isin(y, (0.0, 1.0)).all():
            raise ShapeError("The outcome must only contain 0 and 1.")

        if not np.all(z[:, 0] == 1.0):
            raise ShapeError("The first exogenous column must be the constant 1.")

        if n < z.shape[1] + d.shape[1]:
            raise ShapeError(
                f"{n} observations are too few for {z.shape[1] + d.shape[1]}"
                " regressors."
            )

        exog_names = self.exog_names or (INTERCEPT,) + tuple(
            f"z{j}" for j in range(1, z.shape[1])
        )
        endog_names = self.endog_names or (
            ("d",) if d.shape[1] == 1 else tuple(f"d{j + 1}" for j in range(d.shape[1]))
        )

        if len(exog_names) != z.shape[1] or len(endog_names) != d.shape[1]:
            raise ShapeError("Column names don't match the number of columns.")

        for a in (y, z, d):
            a.setflags(write=False)

        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "exog_names", tuple(exog_names))
        object.__setattr__(self, "endog_names", tuple(endog_names))

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def k(self) -> int:
        """Number of exogenous columns, intercept included."""
        return int(self.z.shape[1])

    @property
    def p(self) -> int:
        """Number of endogenous columns."""
        return int(self.d.shape[1])

    @property
    def x(self) -> np.ndarray:
        """The regressors ``X = (Z, D)``."""
        return np.hstack((self.z, self.d))

    def take(self, indices: t.Any) -> Dataset:
        """Rows selected by ``indices``, repeats allowed. Used to draw
        bootstrap resamples.
        """
        idx = np.asarray(indices, dtype=np.intp)
        return dataclasses.replace(
            self, y=self.y[idx], z=self.z[idx], d=self.d[idx]
        )


@dataclasses.dataclass(frozen=True)
class Schema:
    """Which columns of a data file play which role."""

    outcome: str
    endogenous: tuple[str, ...]
    exogenous: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "endogenous", tuple(self.endogenous))
        object.__setattr__(self, "exogenous", tuple(self.exogenous))

        if not self.endogenous:
            raise SchemaError("At least one endogenous column is required.")

    @property
    def columns(self) -> tuple[str, ...]:
        return (self.outcome, *self.exogenous, *self.endogenous)


def _coerce_outcome(values: pd.Series, column: str) -> np.ndarray:
    out = np.empty(len(values), dtype=float)

    for i, raw in enumerate(values):
        value = str(raw).strip().lower()

        if value in _TRUE:
            out[i] = 1.0
        elif value in _FALSE:
            out[i] = 0.0
        else:
            raise ParseError(
                f"Outcome value {raw!r} at row {i + 1} is not binary.",
                row=i + 1,
                column=column,
            )

    return out


def _coerce_numeric(values: pd.Series, column: str) -> np.ndarray:
    out = np.empty(len(values), dtype=float)

    for i, raw in enumerate(values):
        try:
            out[i] = float(str(raw).strip())
        except ValueError as e:
            raise ParseError(
                f"Value {raw!r} in column {column!r} at row {i + 1} is not a number.",
                row=i + 1,
                column=column,
                original_error=e,
            ) from e

        if not np.isfinite(out[i]):
            raise ParseError(
                f"Value {raw!r} in column {column!r} at row {i + 1} is not finite.",
                row=i + 1,
                column=column,
            )

    return out


def parse_csv(source: str | os.PathLike[str] | t.IO[str], schema: Schema) -> Dataset:
    """Read a :class:`Dataset` from a CSV file with a header row.

    The outcome accepts ``0``/``1`` and ``true``/``false``. Numbers use a
    period as decimal separator regardless of locale. An intercept
    column is prepended unless one of the exogenous columns is already
    constant ``1``, in which case that column is moved to the front.
    Rows are numbered from 1, not counting the header.

    :raises SchemaError: if a referenced column is missing.
    :raises ParseError: if a value is missing, not numeric or the
        outcome is not binary, or if there are too few rows for
        the regressors.
    """
    # read everything as text so the conversion rules are ours
    frame = pd.read_csv(
        source, dtype=str, keep_default_na=False, skipinitialspace=True
    )
    missing = [c for c in schema.columns if c not in frame.columns]

    if missing:
        raise SchemaError(f"Missing columns: {', '.join(missing)}", missing=missing)

    for column in schema.columns:
        blank = frame[column].str.strip() == ""

        if blank.any():
            row = int(np.flatnonzero(blank.to_numpy())[0]) + 1
            raise ParseError(
                f"Missing value in column {column!r} at row {row}.",
                row=row,
                column=column,
            )

    y = _coerce_outcome(frame[schema.outcome], schema.outcome)
    exog = {c: _coerce_numeric(frame[c], c) for c in schema.exogenous}
    endog = [_coerce_numeric(frame[c], c) for c in schema.endogenous]
    n = len(y)
    constant = next((c for c, v in exog.items() if np.all(v == 1.0)), None)

    if constant is None:
        exog_names = (INTERCEPT, *schema.exogenous)
        columns = [np.ones(n), *exog.values()]
    else:
        logger.debug("Using column %r as the intercept.", constant)
        exog_names = (constant, *(c for c in schema.exogenous if c != constant))
        columns = [exog[c] for c in exog_names]

    try:
        return Dataset(
            y=y,
            z=np.column_stack(columns),
            d=np.column_stack(endog),
            exog_names=exog_names,
            endog_names=schema.endogenous,
            outcome_name=schema.outcome,
        )
    except ShapeError as e:
        raise ParseError(
            f"The file does not hold a usable sample: {e}", original_error=e
        ) from e


def write_csv(
    data: Dataset, target: str | os.PathLike[str] | t.IO[str] | None = None
) -> str | None:
    """Write ``data`` as CSV with 17 significant digits, so that
    :func:`parse_csv` reads back the same floats. The intercept column
    is omitted. Returns the text if no ``target`` is given.
    """
    frame = pd.DataFrame({data.outcome_name: data.y.astype(int)})

    for j, name in enumerate(data.exog_names[1:], start=1):
        frame[name] = data.z[:, j]

    for j, name in enumerate(data.endog_names):
        frame[name] = data.d[:, j]

    if target is None:
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, float_format="%.17g")
        return buffer.getvalue()

    frame.to_csv(target, index=False, float_format="%.17g")
    return None


def schema_for(data: Dataset) -> Schema:
    """The schema that :func:`write_csv` output of ``data`` follows."""
    return Schema(
        outcome=data.outcome_name,
        endogenous=data.endog_names,
        exogenous=data.exog_names[1:],
    )
