"""Limited information maximum likelihood for binary response models
augmented with control functions,

.. code-block:: text

    L_n(theta) = 1/n sum_i y_i ln F(w_i) + (1 - y_i) ln(1 - F(w_i)),
    w_i = X_i' gamma + eta_i' rho,  theta = (alpha, beta, rho).

Scores and Hessians are means over observations, so their scale does
not grow with ``n``.
"""

from __future__ import annotations

import collections.abc as cabc
import dataclasses
import logging
import math
import typing as t

import numpy as np

from ._normal import norm_cdf
from .control import ControlFunction
from .control import QuantileFamily
from .control import build
from .dataset import Dataset
from .exc import CollinearityError
from .exc import ConfigError
from .exc import DomainError
from .exc import ShapeError
from .exc import UnsupportedOperationError
from .links import LinkFamily
from .links import ProbitLink
from .links import get_link

logger = logging.getLogger(__name__)

#: What can be passed where control values are expected: nothing, one
#: control, several controls, or the raw values as an array.
Controls = t.Union[
    None,
    ControlFunction,
    np.ndarray,
    t.Sequence[t.Union[ControlFunction, np.ndarray]],
]


@dataclasses.dataclass(frozen=True, eq=False)
class Theta:
    """Coefficients in the column order of ``W = (Z, D, eta)``:
    ``alpha`` for the exogenous columns (intercept first), ``beta`` for
    the endogenous columns and ``rho`` for the controls. With a single
    endogenous regressor ``beta`` and ``rho`` have length 1.
    """

    alpha: np.ndarray
    beta: np.ndarray
    rho: np.ndarray

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "rho"):
            value = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))

            if value.ndim != 1 or not np.isfinite(value).all():
                raise DomainError(f"'{name}' must be a finite vector.")

            object.__setattr__(self, name, value)

    @property
    def params(self) -> np.ndarray:
        """All coefficients as one vector ``(alpha, beta, rho)``."""
        return np.concatenate((self.alpha, self.beta, self.rho))

    @property
    def gamma(self) -> np.ndarray:
        """The coefficients of ``X``, ``(alpha, beta)``."""
        return np.concatenate((self.alpha, self.beta))

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.alpha), len(self.beta), len(self.rho)

    @classmethod
    def from_params(cls, params: t.Any, k: int, p: int) -> Theta:
        """Split a flat vector into ``k`` exogenous, ``p`` endogenous
        and the remaining control coefficients.
        """
        params = np.asarray(params, dtype=float)
        return cls(alpha=params[:k], beta=params[k : k + p], rho=params[k + p :])

    def names(self, data: Dataset) -> list[str]:
        """Coefficient names taken from the dataset columns. Controls
        are named ``rho`` or, with several, ``rho_1, rho_2, ...``.
        """
        q = len(self.rho)
        rho = ["rho"] if q == 1 else [f"rho_{j + 1}" for j in range(q)]
        return [*data.exog_names, *data.endog_names, *rho]


@dataclasses.dataclass(frozen=True)
class NewtonOptions:
    """Settings of the safeguarded Newton-Raphson solver."""

    #: Stop when the Euclidean norm of the mean score drops below this.
    tol: float = 1e-8
    max_iter: int = 100
    #: Step halvings tried per iteration before giving up.
    max_halvings: int = 30
    #: Condition number of the column-equilibrated design above which
    #: the design counts as collinear.
    max_condition: float = 1e8

    def __post_init__(self) -> None:
        if not (self.tol > 0 and self.max_condition > 1):
            raise ConfigError("Tolerance and condition threshold must be positive.")

        if self.max_iter < 0 or self.max_halvings < 0:
            raise ConfigError("Iteration limits must not be negative.")


@dataclasses.dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of maximizing the likelihood.

    ``hessian`` is the Jacobian of the mean score at ``theta`` and
    ``fisher_cov = -hessian^-1 / n`` the covariance of ``theta`` from the
    observed information. Coefficients that were held fixed (inert
    controls, normalizations) have zero rows and columns in both.
    """

    theta: Theta
    loglik: float
    score_norm: float
    hessian: np.ndarray
    fisher_cov: np.ndarray
    iterations: int
    converged: bool
    design_condition: float
    link: str
    n_obs: int

    @property
    def se(self) -> np.ndarray:
        """Standard errors from :attr:`fisher_cov`."""
        with np.errstate(invalid="ignore"):
            return t.cast(np.ndarray, np.sqrt(np.diag(self.fisher_cov)))


def control_matrix(eta: Controls, n: int) -> np.ndarray:
    """Stack control values into an ``n x q`` matrix."""
    if eta is None:
        return np.empty((n, 0))

    if isinstance(eta, ControlFunction):
        parts: list[np.ndarray] = [eta.values]
    elif isinstance(eta, np.ndarray):
        parts = [eta]
    elif isinstance(eta, cabc.Sequence):
        parts = [
            e.values if isinstance(e, ControlFunction) else np.asarray(e) for e in eta
        ]
    else:
        raise ShapeError(f"Can't use {type(eta).__name__} as control values.")

    if not parts:
        return np.empty((n, 0))

    columns = []

    for part in parts:
        c = np.asarray(part, dtype=float)

        if c.ndim == 1:
            c = c[:, None]

        if c.ndim != 2 or c.shape[0] != n:
            raise ShapeError(f"Control values have shape {c.shape}, expected {n} rows.")

        columns.append(c)

    out = np.hstack(columns)

    if not np.isfinite(out).all():
        raise DomainError("Control values must be finite.")

    return out


def design(data: Dataset, eta: Controls) -> np.ndarray:
    """The augmented regressor matrix ``W = (Z, D, eta)``."""
    return np.hstack((data.z, data.d, control_matrix(eta, data.n)))


def design_condition(w: np.ndarray) -> float:
    """Condition number of ``w`` after scaling each column to unit
    length, so that the units of the regressors don't matter.
    """
    norms = np.linalg.norm(w, axis=0)

    if np.any(norms == 0):
        return math.inf

    return float(np.linalg.cond(w / norms))


def _as_theta(theta: Theta | t.Any, data: Dataset, q: int) -> np.ndarray:
    if isinstance(theta, Theta):
        params = theta.params
    else:
        params = np.asarray(theta, dtype=float)

    if params.shape != (data.k + data.p + q,):
        raise ShapeError(
            f"Expected {data.k + data.p + q} coefficients, got {params.shape}."
        )

    return params


def loglik(
    theta: Theta, data: Dataset, eta: Controls, link: str | LinkFamily = "probit"
) -> float:
    """Mean log-likelihood ``L_n(theta)``."""
    w = design(data, eta)
    params = _as_theta(theta, data, w.shape[1] - data.k - data.p)
    return float(np.mean(get_link(link).loglik_obs(data.y, w @ params)))


def _index(theta: Theta, x: t.Any, eta_i: t.Any) -> float:
    x = np.asarray(x, dtype=float)
    eta_i = np.atleast_1d(np.asarray(eta_i, dtype=float))

    if x.shape != theta.gamma.shape or eta_i.shape != theta.rho.shape:
        raise ShapeError("Observation does not match the coefficient vector.")

    return float(x @ theta.gamma + eta_i @ theta.rho)


def psi(
    theta: Theta, y: float, x: t.Any, eta_i: t.Any, link: str | LinkFamily = "probit"
) -> float:
    """Score factor ``psi`` of a single observation, the derivative of
    its log-likelihood with respect to the index.
    """
    w = np.array([_index(theta, x, eta_i)])
    return float(get_link(link).psi(np.array([float(y)]), w)[0])


def psi_dot(
    theta: Theta, y: float, x: t.Any, eta_i: t.Any, link: str | LinkFamily = "probit"
) -> float:
    """Derivative of :func:`psi` with respect to the index."""
    w = np.array([_index(theta, x, eta_i)])
    return float(get_link(link).psi_dot(np.array([float(y)]), w)[0])


def score(
    theta: Theta, data: Dataset, eta: Controls, link: str | LinkFamily = "probit"
) -> np.ndarray:
    """Mean score ``1/n sum_i W_i psi_i``, length ``k + p + q``."""
    w = design(data, eta)
    params = _as_theta(theta, data, w.shape[1] - data.k - data.p)
    return t.cast(np.ndarray, w.T @ get_link(link).psi(data.y, w @ params) / data.n)


def hessian(
    theta: Theta, data: Dataset, eta: Controls, link: str | LinkFamily = "probit"
) -> np.ndarray:
    """Jacobian of :func:`score`, ``1/n sum_i W_i W_i' psi_dot_i``."""
    w = design(data, eta)
    params = _as_theta(theta, data, w.shape[1] - data.k - data.p)
    weights = get_link(link).psi_dot(data.y, w @ params)
    h = (w * weights[:, None]).T @ w / data.n
    return t.cast(np.ndarray, (h + h.T) / 2.0)


def _newton(
    w: np.ndarray,
    y: np.ndarray,
    link: LinkFamily,
    start: np.ndarray,
    opts: NewtonOptions,
) -> tuple[np.ndarray, int, bool]:
    n = y.shape[0]
    params = start.copy()

    def objective(b: np.ndarray) -> float:
        return float(np.mean(link.loglik_obs(y, w @ b)))

    current = objective(params)

    for iteration in range(opts.max_iter + 1):
        index = w @ params
        grad = w.T @ link.psi(y, index) / n
        norm = float(np.linalg.norm(grad))
        logger.debug(
            "Newton iteration %d: loglik %.12g, score norm %.3g.",
            iteration,
            current,
            norm,
        )

        if norm < opts.tol:
            return params, iteration, True

        if iteration == opts.max_iter:
            break

        h = (w * link.psi_dot(y, index)[:, None]).T @ w / n
        step, *_ = np.linalg.lstsq(h, grad, rcond=None)

        for halving in range(opts.max_halvings + 1):
            candidate = params - step * 0.5**halving
            value = objective(candidate)

            # accept ties within rounding so the last steps aren't rejected
            if value >= current - 1e-12 * max(1.0, abs(current)):
                break
        else:
            logger.warning(
                "No improving step after %d halvings at iteration %d.",
                opts.max_halvings,
                iteration,
            )
            return params, iteration, False

        if halving:
            logger.debug("Accepted step after %d halvings.", halving)

        params, current = candidate, value

    logger.warning(
        "Newton-Raphson did not converge in %d iterations (score norm %.3g).",
        opts.max_iter,
        norm,
    )
    return params, opts.max_iter, False


def fit(
    data: Dataset,
    eta: Controls = None,
    link: str | LinkFamily = "probit",
    opts: NewtonOptions | None = None,
    start: Theta | None = None,
) -> FitResult:
    """Maximize :func:`loglik` by Newton-Raphson with step halving.

    Without ``start``, the coefficients of ``X`` start from the plain
    binary response fit that ignores the controls, and ``rho`` from 0.
    A control column that is identically zero is inert: its coefficient
    stays 0 and it is left out of the Newton system. Failing to converge
    is reported through :attr:`FitResult.converged`, not raised.

    :raises CollinearityError: if the augmented design is (nearly)
        collinear.
    """
    if opts is None:
        opts = NewtonOptions()

    link = get_link(link)
    w = design(data, eta)
    m = w.shape[1]
    q = m - data.k - data.p
    active = np.any(w != 0.0, axis=0)
    active[: data.k + data.p] = True

    if not active.all():
        logger.warning("Holding %d all-zero control column(s) at 0.", m - active.sum())

    condition = design_condition(w[:, active])

    if not np.isfinite(condition) or condition > opts.max_condition:
        raise CollinearityError(
            f"The augmented design is collinear (condition number {condition:.3g});"
            " the control function is not identified.",
            condition=condition,
        )

    if start is not None:
        params = _as_theta(start, data, q).copy()
    elif q > 0:
        plain = fit(data, None, link, opts)
        params = np.concatenate((plain.theta.params, np.zeros(q)))
    else:
        params = np.zeros(m)

    params[~active] = 0.0
    solved, iterations, converged = _newton(
        w[:, active], data.y, link, params[active], opts
    )
    params[active] = solved
    index = w @ params
    grad = w.T @ link.psi(data.y, index) / data.n
    h = (w * link.psi_dot(data.y, index)[:, None]).T @ w / data.n
    h = (h + h.T) / 2.0
    h[~active, :] = 0.0
    h[:, ~active] = 0.0
    cov = np.zeros((m, m))

    try:
        block = h[np.ix_(active, active)]
        cov[np.ix_(active, active)] = -np.linalg.inv(block) / data.n
    except np.linalg.LinAlgError:
        cov[:] = np.nan

    if not converged:
        logger.warning("Fit did not converge after %d iterations.", iterations)

    return FitResult(
        theta=Theta.from_params(params, data.k, data.p),
        loglik=float(np.mean(link.loglik_obs(data.y, index))),
        score_norm=float(np.linalg.norm(grad)),
        hessian=h,
        fisher_cov=(cov + cov.T) / 2.0,
        iterations=iterations,
        converged=converged,
        design_condition=condition,
        link=link.name,
        n_obs=data.n,
    )


def asf_parametric(
    theta: Theta, x: t.Any, link: str | LinkFamily = "probit"
) -> float:
    """Average structural function of the probit model at
    ``x = (z, d)``, ``Phi(x' gamma / sqrt(1 + |rho|^2))``. With several
    controls their normal scores are treated as independent.

    :raises UnsupportedOperationError: for links other than probit.
    """
    if not isinstance(get_link(link), ProbitLink):
        raise UnsupportedOperationError(
            "The closed form ASF is only available for the probit link;"
            " use the nonparametric ASF instead."
        )

    x = np.asarray(x, dtype=float)

    if x.shape != theta.gamma.shape:
        raise ShapeError(f"Expected x of length {len(theta.gamma)}, got {x.shape}.")

    scale = math.sqrt(1.0 + float(theta.rho @ theta.rho))
    return float(norm_cdf(x @ theta.gamma / scale))


@dataclasses.dataclass(frozen=True)
class ProfilePoint:
    lam: float
    loglik: float
    converged: bool


def profile_loglik_lambda(
    data: Dataset,
    residuals: t.Any,
    link: str | LinkFamily,
    lambda_grid: t.Iterable[float],
    opts: NewtonOptions | None = None,
) -> list[ProfilePoint]:
    """Maximized log-likelihood for each skewness ``lam`` of the
    two-piece skew-normal control family. Only a diagnostic: a peak
    away from 0 suggests ``m(V)`` is not normal.

    :param residuals: First stage residuals, one column per endogenous
        regressor.
    :raises DomainError: if the grid is empty or leaves ``(-1, 1)``.
    """
    grid = [float(lam) for lam in lambda_grid]

    if not grid:
        raise DomainError("The skewness grid is empty.")

    if any(not -1.0 < lam < 1.0 for lam in grid):
        raise DomainError("Skewness values must lie in (-1, 1).")

    res = np.asarray(residuals, dtype=float)
    res = res.reshape(data.n, -1)
    out = []

    for lam in grid:
        family = QuantileFamily.skew(lam)
        controls = [build(res[:, j], family) for j in range(res.shape[1])]
        result = fit(data, controls, link, opts)
        logger.info("Skewness %.3g: loglik %.8g.", lam, result.loglik)
        out.append(ProfilePoint(lam, result.loglik, result.converged))

    return out
