"""Estimation with an unknown link. ``F`` is replaced by a
Nadaraya-Watson regression of ``Y`` on the index and the trimmed
quasi-likelihood is maximized with the index normalized by pinning one
slope to 1 and dropping the intercept.
"""

from __future__ import annotations

import dataclasses
import logging
import typing as t

import numpy as np
from scipy import optimize
from statsmodels.tools import numdiff

from .dataset import Dataset
from .exc import BandwidthError
from .exc import CollinearityError
from .exc import ConfigError
from .exc import DegenerateTrimError
from .exc import RankCFError
from .exc import ShapeError
from .first_stage import rule_of_thumb_bandwidth
from .liml import Controls
from .liml import FitResult
from .liml import Theta
from .liml import design
from .liml import design_condition
from .liml import fit as fit_parametric

logger = logging.getLogger(__name__)

#: Link estimates are kept inside ``[LINK_CLAMP, 1 - LINK_CLAMP]``.
LINK_CLAMP = 1e-6

#: Smallest sample the link smoother accepts.
MIN_LINK_SAMPLE = 10

#: Step of the numerical Hessian behind the Fisher covariance.
HESSIAN_STEP = 1e-4


@dataclasses.dataclass(frozen=True)
class SemiparamSpec:
    """Settings of the semiparametric fit.

    :param bandwidth: Bandwidth of the link smoother. ``None`` uses
        Silverman's rule on the current index values.
    :param trim: Empirical quantiles of the starting index outside of
        which observations are dropped from the objective.
    :param normalization_index: Position in the coefficient vector of
        the slope pinned to 1. The default is the first exogenous slope
        after the intercept.
    """

    bandwidth: float | None = None
    trim: tuple[float, float] = (0.01, 0.99)
    normalization_index: int = 1
    max_iter: int = 200
    #: Step of the central difference gradient.
    gradient_step: float = 1e-5
    gtol: float = 1e-6
    max_condition: float = 1e8

    def __post_init__(self) -> None:
        low, high = self.trim

        if not 0.0 < low < high < 1.0:
            raise ConfigError(f"Invalid trimming quantiles {self.trim}.")

        object.__setattr__(self, "trim", (float(low), float(high)))

        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError(f"Bandwidth must be positive, got {self.bandwidth}.")

        if self.normalization_index < 1:
            raise ConfigError("The intercept can't carry the normalization.")

        if self.max_iter < 1 or not self.gradient_step > 0 or not self.gtol > 0:
            raise ConfigError("Optimizer settings must be positive.")


@dataclasses.dataclass(frozen=True, eq=False)
class SemiparamFitResult(FitResult):
    bandwidth: float
    #: Observations kept by trimming.
    retained: np.ndarray
    #: Index range kept by trimming.
    trim_bounds: tuple[float, float]


def nw_link(
    index: t.Any,
    y: t.Any,
    bandwidth: float,
    eval_points: t.Any | None = None,
    leave_one_out: bool = False,
) -> np.ndarray:
    """Gaussian kernel Nadaraya-Watson estimate of ``P(Y = 1 | index)``
    at ``eval_points`` (the sample itself by default). With
    ``leave_one_out`` each sample point is left out of its own estimate,
    which requires evaluating at the sample. Results are clamped to
    ``[1e-6, 1 - 1e-6]``.

    :raises BandwidthError: if some kernel sum vanishes.
    """
    index = np.asarray(index, dtype=float)
    y = np.asarray(y, dtype=float)

    if index.ndim != 1 or index.shape != y.shape:
        raise ShapeError("Index and outcome must be vectors of equal length.")

    if index.shape[0] < MIN_LINK_SAMPLE:
        raise ShapeError(f"The link smoother needs {MIN_LINK_SAMPLE} or more points.")

    if not bandwidth > 0:
        raise BandwidthError(f"Bandwidth must be positive, got {bandwidth}.", bandwidth)

    if eval_points is None:
        points = index
    elif leave_one_out:
        raise ShapeError("Leave-one-out estimates are only defined at the sample.")
    else:
        points = np.atleast_1d(np.asarray(eval_points, dtype=float))

    u = (points[None, :] - index[:, None]) / bandwidth

    with np.errstate(under="ignore"):
        k = np.exp(-0.5 * u * u)

    if leave_one_out:
        np.fill_diagonal(k, 0.0)

    denominator = k.sum(axis=0)

    if np.any(denominator <= 0.0):
        raise BandwidthError(
            f"Bandwidth {bandwidth:.3g} leaves evaluation points without"
            " neighbours.",
            bandwidth,
        )

    out = (y @ k) / denominator
    return t.cast(np.ndarray, np.clip(out, LINK_CLAMP, 1.0 - LINK_CLAMP))


def trim_mask(
    index: t.Any, trim: tuple[float, float]
) -> tuple[np.ndarray, float, float]:
    """Observations whose index lies within the ``trim`` empirical
    quantiles, and the bounds of that range.
    """
    index = np.asarray(index, dtype=float)
    low, high = np.quantile(index, trim)
    return (index >= low) & (index <= high), float(low), float(high)


def _quasi_loglik(
    index: np.ndarray, y: np.ndarray, retained: np.ndarray, bandwidth: float | None
) -> float:
    h = rule_of_thumb_bandwidth(index) if bandwidth is None else bandwidth
    p = nw_link(index, y, h, leave_one_out=True)
    obs = y * np.log(p) + (1.0 - y) * np.log1p(-p)
    return float(np.sum(obs[retained]) / y.shape[0])


def _start(data: Dataset, eta: Controls, pin: int) -> np.ndarray:
    w = design(data, eta)

    try:
        probit = fit_parametric(data, eta)
    except RankCFError:
        probit = None

    candidates = []

    if probit is not None and probit.converged:
        candidates.append(probit.theta.params)

    coefficients, *_ = np.linalg.lstsq(w, data.y, rcond=None)
    candidates.append(coefficients)

    for params in candidates:
        scale = params[pin]

        if np.isfinite(scale) and abs(scale) > 1e-8:
            return t.cast(np.ndarray, params / scale)

    params = np.zeros(w.shape[1])
    params[pin] = 1.0
    return params


def fit_semiparam(
    data: Dataset,
    eta: Controls = None,
    spec: SemiparamSpec | None = None,
    start: Theta | None = None,
) -> SemiparamFitResult:
    """Maximize the trimmed quasi-likelihood

    .. code-block:: text

        1/n sum_i tau_i (y_i ln F_n(w_i) + (1 - y_i) ln(1 - F_n(w_i)))

    over the free coefficients by BFGS with central difference
    gradients. ``F_n`` is the leave-one-out link estimate at the current
    index. The intercept is 0 and the coefficient at
    ``spec.normalization_index`` is 1 throughout. The trimming set is
    fixed at the starting coefficients, the probit fit rescaled to the
    normalization.

    :raises DegenerateTrimError: if trimming leaves no observations.
    :raises CollinearityError: if the design without the intercept is
        collinear.
    """
    if spec is None:
        spec = SemiparamSpec()

    w = design(data, eta)
    m = w.shape[1]
    pin = spec.normalization_index

    if pin >= data.k + data.p:
        raise ConfigError(
            f"Normalization index {pin} does not refer to a slope of X."
        )

    columns = np.ones(m, dtype=bool)
    columns[0] = False
    condition = design_condition(w[:, columns])

    if not np.isfinite(condition) or condition > spec.max_condition:
        raise CollinearityError(
            f"The augmented design is collinear (condition number {condition:.3g}).",
            condition=condition,
        )

    params = _start(data, eta, pin) if start is None else start.params.copy()
    params[0] = 0.0
    params[pin] = 1.0
    free = columns.copy()
    free[pin] = False
    retained, low, high = trim_mask(w @ params, spec.trim)
    logger.debug(
        "Trimming keeps %d of %d observations in [%.4g, %.4g].",
        retained.sum(),
        data.n,
        low,
        high,
    )

    if not retained.any():
        raise DegenerateTrimError(
            f"Trimming to quantiles {spec.trim} leaves no observations."
        )

    def full(b: np.ndarray) -> np.ndarray:
        out = params.copy()
        out[free] = b
        return out

    def objective(b: np.ndarray) -> float:
        return -_quasi_loglik(w @ full(b), data.y, retained, spec.bandwidth)

    def gradient(b: np.ndarray) -> np.ndarray:
        out = numdiff.approx_fprime(b, objective, spec.gradient_step, centered=True)
        return t.cast(np.ndarray, np.ravel(out))

    if free.any():
        res = optimize.minimize(
            objective,
            params[free],
            jac=gradient,
            method="BFGS",
            options={"maxiter": spec.max_iter, "gtol": spec.gtol},
        )
        # status 2 is a line search stalled by finite difference noise
        converged = bool(res.success or res.status == 2)
        iterations = int(res.nit)
        solved = res.x
        logger.debug("BFGS finished: %s", res.message)

        if not converged:
            logger.warning("Semiparametric fit did not converge: %s", res.message)
    else:
        converged, iterations, solved = True, 0, params[free]

    params = full(solved)
    index = w @ params
    bandwidth = (
        rule_of_thumb_bandwidth(index) if spec.bandwidth is None else spec.bandwidth
    )
    hessian = np.zeros((m, m))
    cov = np.zeros((m, m))
    score_norm = 0.0

    if free.any():
        score_norm = float(np.linalg.norm(gradient(solved)))
        block = -numdiff.approx_hess(solved, objective, epsilon=HESSIAN_STEP)
        block = (block + block.T) / 2.0
        hessian[np.ix_(free, free)] = block

        try:
            cov[np.ix_(free, free)] = -np.linalg.inv(block) / data.n
        except np.linalg.LinAlgError:
            cov[np.ix_(free, free)] = np.nan

    return SemiparamFitResult(
        theta=Theta.from_params(params, data.k, data.p),
        loglik=-objective(solved),
        score_norm=score_norm,
        hessian=hessian,
        fisher_cov=(cov + cov.T) / 2.0,
        iterations=iterations,
        converged=converged,
        design_condition=condition,
        link="np",
        n_obs=data.n,
        bandwidth=float(bandwidth),
        retained=retained,
        trim_bounds=(low, high),
    )


def asf_nonparam(
    theta: Theta,
    data: Dataset,
    eta: Controls,
    x: t.Any,
    spec: SemiparamSpec | None = None,
) -> float:
    """Average structural function with the estimated link,
    ``1/n sum_i F_n(x' gamma + rho' eta_i)``. ``F_n`` is fitted on the
    sample index with the bandwidth the fit used.
    """
    if spec is None:
        spec = SemiparamSpec()

    w = design(data, eta)
    params = theta.params

    if params.shape != (w.shape[1],):
        raise ShapeError("Coefficients do not match the design.")

    x = np.asarray(x, dtype=float)

    if x.shape != theta.gamma.shape:
        raise ShapeError(f"Expected x of length {len(theta.gamma)}, got {x.shape}.")

    index = w @ params
    h = rule_of_thumb_bandwidth(index) if spec.bandwidth is None else spec.bandwidth
    controls = w[:, data.k + data.p :]
    points = x @ theta.gamma + controls @ theta.rho
    return float(np.mean(nw_link(index, data.y, h, points)))
