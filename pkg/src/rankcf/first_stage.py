from __future__ import annotations

import dataclasses
import enum
import logging
import typing as t

import numpy as np

from .exc import BandwidthError
from .exc import ShapeError
from .exc import SingularDesignError

logger = logging.getLogger(__name__)

#: Condition number above which a first stage design counts as singular.
SINGULAR_CONDITION = 1e10

#: Smallest weighted variance of a local design, relative to the squared
#: bandwidth, that still identifies a local slope.
DEGENERATE_SPREAD = 1e-8


class FirstStageKind(str, enum.Enum):
    OLS = "ols"
    LOCAL_LINEAR = "local-linear"


@dataclasses.dataclass(frozen=True, eq=False)
class FirstStageFit:
    """Reduced form fit ``pi_n`` of an endogenous column on ``Z``.
    ``fitted + residuals`` reproduces the column.
    """

    kind: FirstStageKind
    fitted: np.ndarray
    residuals: np.ndarray
    #: OLS coefficients, ``None`` for local linear fits.
    coefficients: np.ndarray | None = None
    #: Bandwidth per non-intercept column, ``None`` for OLS.
    bandwidth: np.ndarray | None = None
    #: Backfitting sweeps used, 0 when no backfitting was needed.
    sweeps: int = 0


def _check_inputs(z: t.Any, d: t.Any) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=float)
    d = np.asarray(d, dtype=float)

    if z.ndim == 1:
        z = z[:, None]

    if z.ndim != 2 or d.ndim != 1 or z.shape[0] != d.shape[0]:
        raise ShapeError(
            f"Expected z with one row per element of d, got {z.shape} and {d.shape}."
        )

    return z, d


def fit_ols(z: t.Any, d: t.Any) -> FirstStageFit:
    """Least squares regression of ``d`` on the columns of ``z``.

    :raises SingularDesignError: if ``z`` is rank deficient.
    """
    z, d = _check_inputs(z, d)
    condition = float(np.linalg.cond(z))

    if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
        raise SingularDesignError(
            f"First stage design is singular (condition number {condition:.3g}).",
            condition=condition,
        )

    coefficients, *_ = np.linalg.lstsq(z, d, rcond=None)
    fitted = z @ coefficients
    return FirstStageFit(
        kind=FirstStageKind.OLS,
        fitted=fitted,
        residuals=d - fitted,
        coefficients=coefficients,
    )


def rule_of_thumb_bandwidth(x: t.Any) -> float:
    """Silverman's rule ``1.06 sd(x) n^(-1/5)``."""
    x = np.asarray(x, dtype=float)
    return float(1.06 * np.std(x, ddof=1) * x.shape[0] ** -0.2)


def local_linear_smooth(
    x: np.ndarray, y: np.ndarray, bandwidth: float, points: np.ndarray | None = None
) -> np.ndarray:
    """Intercept of a Gaussian-kernel weighted linear fit of ``y`` on
    ``x`` at each of ``points`` (the sample itself by default).

    :raises BandwidthError: if the weighted local design at some point
        is degenerate, meaning the kernel puts all of its mass on a
        single location.
    """
    if points is None:
        points = x

    x0 = points[None, :] - x[:, None]
    x02 = x0 * x0

    with np.errstate(under="ignore"):
        w = np.exp(-x02 / (2.0 * bandwidth * bandwidth))

    s0 = w.sum(axis=0)
    s1 = (w * x0).sum(axis=0)
    s2 = (w * x02).sum(axis=0)
    denominator = s0 * s2 - s1 * s1
    # weighted variance of the local design in units of h^2
    scale = s0 * s0 * bandwidth * bandwidth
    degenerate = ~(denominator > DEGENERATE_SPREAD * scale)

    if np.any(degenerate):
        with np.errstate(divide="ignore", invalid="ignore"):
            effective = s0 * s0 / (w * w).sum(axis=0)

        finite = effective[degenerate & np.isfinite(effective)]
        smallest = float(finite.min()) if finite.size else 0.0
        raise BandwidthError(
            f"Bandwidth {bandwidth:.3g} is too small: the local design at"
            f" {int(degenerate.sum())} point(s) is degenerate.",
            bandwidth=bandwidth,
            effective_size=smallest,
        )

    wy = w * y[:, None]
    t0 = wy.sum(axis=0)
    t1 = (wy * x0).sum(axis=0)
    return t.cast(np.ndarray, (s2 * t0 - s1 * t1) / denominator)


def fit_local_linear(
    z: t.Any,
    d: t.Any,
    bandwidth: float | t.Sequence[float] | None = None,
    max_sweeps: int = 50,
    tol: float = 1e-8,
) -> FirstStageFit:
    """Nonparametric reduced form by local linear regression with a
    Gaussian kernel. The first column of ``z`` is the intercept. With a
    single regressor the smoother is applied directly; with several the
    additive model ``c + sum_j f_j(z_j)`` is fitted by backfitting.

    :param bandwidth: One bandwidth, or one per non-intercept column.
        Defaults to :func:`rule_of_thumb_bandwidth` per column.
    :raises BandwidthError: if a bandwidth is too small.
    """
    z, d = _check_inputs(z, d)
    regressors = z[:, 1:]
    q = regressors.shape[1]

    if q == 0:
        raise ShapeError("Local linear first stage needs a non-intercept regressor.")

    if bandwidth is None:
        h = np.array([rule_of_thumb_bandwidth(regressors[:, j]) for j in range(q)])
    else:
        h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (q,)).copy()

    if np.any(~np.isfinite(h)) or np.any(h <= 0):
        raise BandwidthError(
            f"Bandwidth must be positive, got {h}.", bandwidth=float(np.min(h))
        )

    logger.debug("Local linear first stage with bandwidth %s.", h)

    if q == 1:
        fitted = local_linear_smooth(regressors[:, 0], d, float(h[0]))
        return FirstStageFit(
            kind=FirstStageKind.LOCAL_LINEAR,
            fitted=fitted,
            residuals=d - fitted,
            bandwidth=h,
        )

    level = d.mean()
    components = np.zeros((d.shape[0], q))
    sweeps = 0

    for sweeps in range(1, max_sweeps + 1):
        change = 0.0

        for j in range(q):
            partial = d - level - components.sum(axis=1) + components[:, j]
            update = local_linear_smooth(regressors[:, j], partial, float(h[j]))
            update -= update.mean()
            change = max(change, float(np.max(np.abs(update - components[:, j]))))
            components[:, j] = update

        logger.debug("Backfitting sweep %d, max change %.3g.", sweeps, change)

        if change < tol:
            break
    else:
        logger.warning("Backfitting stopped after %d sweeps, not converged.", sweeps)

    fitted = level + components.sum(axis=1)
    return FirstStageFit(
        kind=FirstStageKind.LOCAL_LINEAR,
        fitted=fitted,
        residuals=d - fitted,
        bandwidth=h,
        sweeps=sweeps,
    )
