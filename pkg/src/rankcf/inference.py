"""Inference for the control function estimators.

The estimated controls make the textbook covariance invalid unless
``rho = 0``, so standard errors generally come from the pairs bootstrap,
which reruns the whole procedure, first stage and ranks included, on
every resample.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import math
import typing as t

import numpy as np
from scipy import stats

from ._normal import norm_pdf
from .dataset import Dataset
from .exc import CovarianceError
from .exc import DomainError
from .exc import RankCFError
from .exc import ShapeError
from .exc import UnreliableBootstrapError
from .liml import FitResult
from .liml import Theta
from .liml import asf_parametric

logger = logging.getLogger(__name__)

#: Two-sided 5% critical value of the standard normal. A statistic
#: exactly at the value does not reject.
CRITICAL_VALUE = 1.96

#: Eigenvalues of a covariance may dip this far below 0 from rounding.
PSD_TOLERANCE = 1e-10

#: An estimation procedure for the bootstrap. It may return a fit or a
#: plain parameter vector.
Procedure = t.Callable[[Dataset], t.Union[FitResult, np.ndarray]]


@dataclasses.dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """Asymptotic covariance ``Sigma`` of ``sqrt(n) (theta_n - theta)``.
    Standard errors are ``sqrt(diag(Sigma) / n)``.
    """

    sigma: np.ndarray
    b_used: int
    b_failed: int
    n_obs: int

    def __post_init__(self) -> None:
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))

        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ShapeError(f"Covariance must be square, got {sigma.shape}.")

        if not np.isfinite(sigma).all():
            raise CovarianceError("Covariance contains non-finite values.")

        scale = max(1.0, float(np.abs(sigma).max())) if sigma.size else 1.0

        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12 * scale):
            raise CovarianceError("Covariance is not symmetric.")

        sigma = (sigma + sigma.T) / 2.0
        smallest = float(np.linalg.eigvalsh(sigma).min()) if sigma.size else 0.0

        if smallest < -PSD_TOLERANCE * scale:
            raise CovarianceError(
                f"Covariance is not positive semidefinite, eigenvalue {smallest:.3g}."
            )

        if self.n_obs < 1:
            raise DomainError("The sample size must be positive.")

        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def from_fit(cls, fit: FitResult) -> CovarianceEstimate:
        """The observed information covariance of a fit, on the same
        scale as a bootstrap estimate. Only valid when ``rho = 0``.
        """
        return cls(
            sigma=fit.fisher_cov * fit.n_obs, b_used=0, b_failed=0, n_obs=fit.n_obs
        )

    @property
    def se(self) -> np.ndarray:
        variance = np.clip(np.diag(self.sigma), 0.0, None) / self.n_obs
        return t.cast(np.ndarray, np.sqrt(variance))


def _estimate_vector(result: FitResult | np.ndarray) -> np.ndarray | None:
    if isinstance(result, FitResult):
        if not result.converged:
            return None

        values = result.theta.params
    else:
        values = np.asarray(result, dtype=float)

    if not np.isfinite(values).all():
        return None

    return values


def pairs_bootstrap(
    data: Dataset,
    estimator: Procedure,
    b: int,
    seed: int,
    theta_hat: Theta | np.ndarray | None = None,
    threads: int = 1,
    max_failure_rate: float = 0.2,
) -> CovarianceEstimate:
    """Resample rows ``(Y_i, X_i)`` with replacement ``b`` times, rerun
    ``estimator`` on each resample and return

    .. code-block:: text

        Sigma = n/B sum_b (theta_b - theta_n)(theta_b - theta_n)'

    Replications that raise a :exc:`~rankcf.exc.RankCFError`, don't
    converge or produce non-finite estimates are dropped and counted.
    Each replication draws from its own seed derived from ``seed``, so
    the result is the same for any number of ``threads``.

    :param theta_hat: Estimate on the full sample. It is computed with
        ``estimator`` if not given.
    :raises UnreliableBootstrapError: if more than ``max_failure_rate``
        of the replications fail.
    """
    if b < 2:
        raise DomainError(f"The bootstrap needs at least 2 replications, got {b}.")

    if theta_hat is None:
        center = _estimate_vector(estimator(data))

        if center is None:
            raise UnreliableBootstrapError(
                "The estimate on the full sample failed.", b_used=0, b_failed=0
            )
    elif isinstance(theta_hat, Theta):
        center = theta_hat.params
    else:
        center = np.asarray(theta_hat, dtype=float)

    n = data.n
    seeds = np.random.SeedSequence(seed).spawn(b)

    def replicate(seq: np.random.SeedSequence) -> np.ndarray | None:
        rng = np.random.default_rng(seq)
        sample = data.take(rng.integers(0, n, size=n))

        try:
            values = _estimate_vector(estimator(sample))
        except RankCFError as e:
            logger.debug("Bootstrap replication failed: %s", e)
            return None

        if values is not None and values.shape != center.shape:
            raise ShapeError("The estimator returned a vector of a different length.")

        return values

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            draws = list(pool.map(replicate, seeds))
    else:
        draws = [replicate(s) for s in seeds]

    kept = [v for v in draws if v is not None]
    b_used = len(kept)
    b_failed = b - b_used

    if b_failed:
        logger.warning("Dropped %d of %d bootstrap replications.", b_failed, b)

    if b_used == 0 or b_failed > max_failure_rate * b:
        raise UnreliableBootstrapError(
            f"{b_failed} of {b} bootstrap replications failed.",
            b_used=b_used,
            b_failed=b_failed,
        )

    deviations = np.array(kept) - center
    sigma = n / b_used * deviations.T @ deviations
    return CovarianceEstimate(
        sigma=(sigma + sigma.T) / 2.0, b_used=b_used, b_failed=b_failed, n_obs=n
    )


def asf_gradient(theta: Theta, x: t.Any) -> np.ndarray:
    """Gradient of the probit ASF with respect to all coefficients. With
    ``s^2 = 1 + |rho|^2`` and ``c = x' gamma / s`` it is
    ``phi(c) (x / s, -c rho / s^2)``.
    """
    x = np.asarray(x, dtype=float)

    if x.shape != theta.gamma.shape:
        raise ShapeError(f"Expected x of length {len(theta.gamma)}, got {x.shape}.")

    s2 = 1.0 + float(theta.rho @ theta.rho)
    s = math.sqrt(s2)
    c = float(x @ theta.gamma) / s
    density = float(norm_pdf(c))
    return np.concatenate((density * x / s, -density * c * theta.rho / s2))


@dataclasses.dataclass(frozen=True)
class AsfEstimate:
    x: tuple[float, ...]
    value: float
    se: float | None


def delta_method_asf(
    theta: Theta, cov: CovarianceEstimate, x: t.Any
) -> AsfEstimate:
    """The probit ASF at ``x`` with the delta method standard error
    ``sqrt(g' Sigma g / n)``.
    """
    grad = asf_gradient(theta, x)

    if cov.sigma.shape != (grad.shape[0], grad.shape[0]):
        raise ShapeError("Covariance does not match the coefficient vector.")

    variance = float(grad @ cov.sigma @ grad) / cov.n_obs
    return AsfEstimate(
        x=tuple(float(v) for v in np.asarray(x, dtype=float)),
        value=asf_parametric(theta, x),
        se=math.sqrt(max(variance, 0.0)),
    )


@dataclasses.dataclass(frozen=True, eq=False)
class TestResult:
    """t statistics ``(theta_j - theta0_j) / se_j``. Where ``se_j`` is
    0 the statistic is infinite (0 if the estimate equals the null) and
    ``degenerate`` is set.
    """

    __test__ = False

    statistics: np.ndarray
    se: np.ndarray
    degenerate: np.ndarray

    def rejections(self, critical: float = CRITICAL_VALUE) -> np.ndarray:
        """Two-sided rejections, ``|t| > critical``."""
        return t.cast(np.ndarray, np.abs(self.statistics) > critical)


def t_statistics(
    theta: Theta | t.Any,
    cov: CovarianceEstimate | np.ndarray,
    null_values: t.Any,
) -> TestResult:
    """t statistics against ``null_values``. ``cov`` is either a
    :class:`CovarianceEstimate` or directly the covariance of ``theta``,
    such as :attr:`FitResult.fisher_cov`.
    """
    if isinstance(theta, Theta):
        estimate = theta.params
    else:
        estimate = np.asarray(theta, dtype=float)

    null = np.broadcast_to(np.asarray(null_values, dtype=float), estimate.shape)

    if isinstance(cov, CovarianceEstimate):
        se = cov.se
    else:
        se = np.sqrt(np.clip(np.diag(np.atleast_2d(cov)), 0.0, None))

    if se.shape != estimate.shape:
        raise ShapeError("Covariance does not match the coefficient vector.")

    diff = estimate - null
    degenerate = se == 0.0
    safe = np.where(degenerate, 1.0, se)
    statistics = np.where(degenerate, np.copysign(np.inf, diff), diff / safe)
    statistics = np.where(degenerate & (diff == 0.0), 0.0, statistics)
    return TestResult(statistics=statistics, se=se, degenerate=degenerate)


@dataclasses.dataclass(frozen=True)
class ExogeneityTest:
    #: t statistic with one control, Wald statistic with several.
    statistic: float
    p_value: float
    df: int

    @property
    def rejected(self) -> bool:
        return self.p_value < 0.05


def exogeneity_test(fit: FitResult) -> ExogeneityTest:
    """Test ``rho = 0``. Under that null the controls don't enter the
    model, so the observed information covariance of the fit is valid.
    """
    q = len(fit.theta.rho)

    if q == 0:
        raise DomainError("The fit has no control coefficients to test.")

    rho = fit.theta.rho
    cov = fit.fisher_cov[-q:, -q:]

    if q == 1:
        se = math.sqrt(max(float(cov[0, 0]), 0.0))

        if se == 0.0:
            raise CovarianceError("The control coefficient has no variance.")

        statistic = float(rho[0]) / se
        return ExogeneityTest(statistic, float(2.0 * stats.norm.sf(abs(statistic))), 1)

    try:
        statistic = float(rho @ np.linalg.solve(cov, rho))
    except np.linalg.LinAlgError as e:
        raise CovarianceError("Control coefficients have a singular covariance.") from e

    return ExogeneityTest(statistic, float(stats.chi2.sf(statistic, q)), q)
