"""Rank-based control functions ``eta_i = H^-1(G_n(V_i))``, where
``G_n`` is the relative empirical rank of the first stage residual and
``H^-1`` the quantile function of the assumed distribution of ``m(V)``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import typing as t

import numpy as np
from scipy import stats

from ._normal import norm_ppf
from .exc import ConfigError
from .exc import DomainError
from .exc import UnsupportedOperationError


class FamilyKind(str, enum.Enum):
    STD_NORMAL = "normal"
    TWO_PIECE_SKEW_NORMAL = "skew"
    #: The residual itself is the control, no rank transform.
    IDENTITY = "identity"


@dataclasses.dataclass(frozen=True)
class QuantileFamily:
    """Distribution ``H`` whose quantile function turns ranks into
    control values. ``lam`` is the skewness of the two-piece skew-normal
    family and must lie in ``(-1, 1)``; ``lam = 0`` is the standard
    normal.
    """

    kind: FamilyKind = FamilyKind.STD_NORMAL
    lam: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", FamilyKind(self.kind))

        if self.kind is FamilyKind.TWO_PIECE_SKEW_NORMAL:
            if not -1.0 < self.lam < 1.0:
                raise DomainError(f"Skewness must lie in (-1, 1), got {self.lam}.")
        elif self.lam != 0.0:
            raise ConfigError(f"The {self.kind.value} family takes no skewness.")

    @classmethod
    def normal(cls) -> QuantileFamily:
        return cls(FamilyKind.STD_NORMAL)

    @classmethod
    def skew(cls, lam: float) -> QuantileFamily:
        return cls(FamilyKind.TWO_PIECE_SKEW_NORMAL, lam)

    @classmethod
    def identity(cls) -> QuantileFamily:
        return cls(FamilyKind.IDENTITY)

    @classmethod
    def parse(cls, value: str) -> QuantileFamily:
        """Parse the command line form ``normal``, ``identity`` or
        ``skew:<lambda>``.
        """
        name, _, arg = value.partition(":")

        if name == "skew":
            try:
                lam = float(arg)
            except ValueError as e:
                raise ConfigError(f"Invalid skewness in {value!r}.") from e

            if not math.isfinite(lam):
                raise ConfigError(f"Invalid skewness in {value!r}.")

            try:
                return cls.skew(lam)
            except DomainError as e:
                raise ConfigError(str(e)) from e

        if arg or name not in ("normal", "identity"):
            raise ConfigError(
                f"Unknown control {value!r}, expected normal, skew:<lambda>"
                " or identity."
            )

        return cls(FamilyKind(name))

    def __str__(self) -> str:
        if self.kind is FamilyKind.TWO_PIECE_SKEW_NORMAL:
            return f"skew:{self.lam:g}"

        return self.kind.value


@dataclasses.dataclass(frozen=True, eq=False)
class ControlFunction:
    """Relative ranks of the residuals and the control values built
    from them.
    """

    ranks: np.ndarray
    values: np.ndarray
    family: QuantileFamily


def empirical_ranks(v: t.Any) -> np.ndarray:
    """``G_n(v_i) = rank(v_i) / (n + 1)``. Ties share their average
    rank, so the result stays inside ``[1/(n+1), n/(n+1)]``.
    """
    v = np.asarray(v, dtype=float)

    if v.ndim != 1 or v.shape[0] == 0:
        raise DomainError("Ranks need a non-empty vector.")

    return t.cast(np.ndarray, stats.rankdata(v, method="average") / (v.shape[0] + 1))


def quantile(family: QuantileFamily, u: t.Any) -> t.Any:
    """Quantile function ``H^-1(u)`` of ``family``. Accepts a scalar or
    an array and returns the same.

    The two-piece skew-normal quantile is

    .. code-block:: text

        (1 + lam) Phi^-1(u / (1 + lam))            if u < (1 + lam) / 2
        (1 - lam) Phi^-1((u - lam) / (1 - lam))    otherwise

    :raises DomainError: if ``u`` is not strictly inside ``(0, 1)``.
    :raises UnsupportedOperationError: for the identity family.
    """
    if family.kind is FamilyKind.IDENTITY:
        raise UnsupportedOperationError(
            "The identity control has no quantile function."
        )

    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))

    if np.any(~np.isfinite(u)) or np.any((u <= 0.0) | (u >= 1.0)):
        raise DomainError("Quantile levels must lie strictly inside (0, 1).")

    if family.kind is FamilyKind.STD_NORMAL:
        out = norm_ppf(u)
    else:
        lam = family.lam
        lower = u < (1.0 + lam) / 2.0
        out = np.empty_like(u)
        out[lower] = (1.0 + lam) * norm_ppf(u[lower] / (1.0 + lam))
        upper = u[~lower]
        # the branch is exactly 0 at its breakpoint
        arg = np.clip((upper - lam) / (1.0 - lam), 0.5, None)
        out[~lower] = (1.0 - lam) * norm_ppf(arg)

    if scalar:
        return float(out[0])

    return out


def build(v_residuals: t.Any, family: QuantileFamily | None = None) -> ControlFunction:
    """Control function for first stage residuals. For the identity
    family the values are the residuals unchanged.
    """
    if family is None:
        family = QuantileFamily.normal()

    v = np.asarray(v_residuals, dtype=float)

    if not np.isfinite(v).all():
        raise DomainError("Residuals must be finite.")

    ranks = empirical_ranks(v)

    if family.kind is FamilyKind.IDENTITY:
        values = v.copy()
    else:
        values = quantile(family, ranks)

    return ControlFunction(ranks=ranks, values=values, family=family)
