"""Monte Carlo experiments comparing the estimators on simulated
samples: for each replication draw a sample, fit every estimator, test
against the truth and aggregate mean, std, rmse and empirical size.
"""

from __future__ import annotations

import collections.abc as cabc
import concurrent.futures
import dataclasses
import enum
import logging
import math
import os
import typing as t

import numpy as np
import pandas as pd

from ._json import _CompactJSON
from .control import QuantileFamily
from .dataset import Dataset
from .dgp import DgpConfig
from .dgp import SimSample
from .dgp import generate
from .dgp import simulate_asf
from .dgp import true_asf
from .estimator import SEMIPARAMETRIC
from .estimator import ControlFunctionEstimator
from .exc import CollinearityError
from .exc import ConfigError
from .exc import DomainError
from .exc import RankCFError
from .first_stage import FirstStageKind
from .inference import CovarianceEstimate
from .inference import asf_gradient
from .inference import pairs_bootstrap
from .inference import t_statistics
from .liml import FitResult

logger = logging.getLogger(__name__)

#: Estimates with a component beyond this magnitude count as failed.
EXPLOSION_BOUND = 100.0


class EstimatorName(str, enum.Enum):
    """The estimators compared in an experiment."""

    #: Probit ignoring endogeneity.
    ML = "ML"
    #: Probit with the true ``m(V)`` as control, only possible in
    #: simulations.
    CF0 = "CF0"
    #: Local linear first stage, normal score control.
    MW1 = "MW1"
    #: OLS first stage, normal score control.
    MW2 = "MW2"
    #: Local linear first stage, the residual itself as control.
    DONG = "DONG"
    NP_MW1 = "npMW1"
    NP_MW2 = "npMW2"
    NP_DONG = "npDONG"

    @property
    def semiparametric(self) -> bool:
        return self.value.startswith("np")

    @property
    def uses_fisher_cov(self) -> bool:
        """Whether tests use the observed information instead of the
        bootstrap.
        """
        return self in (EstimatorName.ML, EstimatorName.CF0)

    def parameters(self) -> tuple[str, ...]:
        """Reported quantities. The semiparametric fits have no intercept
        and pin ``alpha1`` to 1.
        """
        if self.semiparametric:
            return "beta", "rho", "asf"

        if self is EstimatorName.ML:
            return "alpha0", "alpha1", "beta", "asf"

        return "alpha0", "alpha1", "beta", "rho", "asf"

    def estimator(self) -> ControlFunctionEstimator:
        base = self.value[2:] if self.semiparametric else self.value
        link = SEMIPARAMETRIC if self.semiparametric else "probit"

        if base == "MW2":
            first_stage = FirstStageKind.OLS
        else:
            first_stage = FirstStageKind.LOCAL_LINEAR

        if base == "DONG":
            control = QuantileFamily.identity()
        else:
            control = QuantileFamily.normal()

        return ControlFunctionEstimator(
            first_stage=first_stage,
            control=control,
            link=link,
            with_controls=self is not EstimatorName.ML,
        )


class AsfEval(str, enum.Enum):
    """Where the ASF is evaluated."""

    AT_MEAN_OF_X = "mean_x"


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """A Monte Carlo experiment. The ``seed`` of ``dgp`` is ignored,
    replication ``r`` draws its sample with ``derive_seed(base_seed, r)``.
    """

    dgp: DgpConfig = DgpConfig()
    replications: int = 300
    estimators: tuple[EstimatorName, ...] = tuple(EstimatorName)
    #: Bootstrap replications for the parametric estimators.
    boot_b: int = 199
    #: Bootstrap replications for the semiparametric estimators.
    boot_b_np: int = 49
    base_seed: int = 0
    asf_eval: AsfEval = AsfEval.AT_MEAN_OF_X
    #: Draws of the simulation used as ASF truth.
    asf_draws: int = 1_000_000
    threads: int = 1

    def __post_init__(self) -> None:
        try:
            estimators = tuple(EstimatorName(e) for e in self.estimators)
            object.__setattr__(self, "asf_eval", AsfEval(self.asf_eval))
        except ValueError as e:
            raise ConfigError(str(e)) from e

        object.__setattr__(self, "estimators", estimators)

        if self.replications < 1:
            raise ConfigError("An experiment needs at least one replication.")

        if not estimators:
            raise ConfigError("An experiment needs at least one estimator.")

        if self.boot_b < 2 or self.boot_b_np < 2:
            raise ConfigError("The bootstrap needs at least 2 replications.")

        if self.asf_draws < 1 or self.threads < 1:
            raise ConfigError("'asf_draws' and 'threads' must be positive.")

    def full_scale(self) -> ExperimentConfig:
        """The same experiment at 1000 replications with 499 and 99
        bootstrap draws.
        """
        return dataclasses.replace(self, replications=1000, boot_b=499, boot_b_np=99)

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> ExperimentConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names

        if unknown:
            raise ConfigError(
                f"Unknown experiment settings: {', '.join(sorted(unknown))}"
            )

        values = dict(data)

        if "dgp" in values:
            dgp = values["dgp"]

            if not isinstance(dgp, cabc.Mapping):
                raise ConfigError("'dgp' must be an object.")

            values["dgp"] = DgpConfig.from_dict(dgp)

        if "estimators" in values:
            values["estimators"] = tuple(values["estimators"])

        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict[str, t.Any]:
        dgp = self.dgp.to_dict()
        del dgp["seed"]
        return {
            "dgp": dgp,
            "replications": self.replications,
            "estimators": [e.value for e in self.estimators],
            "boot_b": self.boot_b,
            "boot_b_np": self.boot_b_np,
            "base_seed": self.base_seed,
            "asf_eval": self.asf_eval.value,
            "asf_draws": self.asf_draws,
            "threads": self.threads,
        }


def derive_seed(base_seed: int, *keys: int) -> int:
    """A 64-bit seed determined by ``base_seed`` and ``keys``."""
    state = np.random.SeedSequence([base_seed, *keys]).generate_state(1, np.uint64)
    return int(state[0])


@dataclasses.dataclass(frozen=True, eq=False)
class Summary:
    """Column-wise statistics of ``R`` replications."""

    mean: np.ndarray
    std: np.ndarray
    rmse: np.ndarray
    size: np.ndarray


def summarize(estimates: t.Any, truths: t.Any, rejections: t.Any) -> Summary:
    """Mean, sample std (divisor ``R - 1``, 0 for a single replication),
    ``rmse = sqrt(mean((theta - truth)^2))`` and rejection frequency of
    the columns of an ``R x p`` matrix of estimates.

    :raises DomainError: if there are no replications.
    """
    estimates = np.asarray(estimates, dtype=float)

    if estimates.ndim == 1:
        estimates = estimates[:, None]

    rejections = np.asarray(rejections, dtype=bool).reshape(estimates.shape)
    truths = np.broadcast_to(np.asarray(truths, dtype=float), estimates.shape[1:])
    r = estimates.shape[0]

    if r == 0:
        raise DomainError("Can't summarize zero replications.")

    mean = estimates.mean(axis=0)

    if r > 1:
        std = estimates.std(axis=0, ddof=1)
    else:
        std = np.zeros(estimates.shape[1])

    return Summary(
        mean=mean,
        std=std,
        rmse=np.sqrt(np.mean((estimates - truths) ** 2, axis=0)),
        size=rejections.mean(axis=0),
    )


@dataclasses.dataclass(frozen=True)
class MetricsRow:
    estimator: str
    parameter: str
    truth: float
    mean: float
    std: float
    rmse: float
    size: float
    #: Replications in which the estimator failed or exploded.
    failures: int


@dataclasses.dataclass(frozen=True, eq=False)
class MetricsTable:
    """Results of :func:`run_experiment`, one row per estimator and
    reported quantity.
    """

    rows: tuple[MetricsRow, ...]
    config: ExperimentConfig
    #: Closed form ASF at the population mean of ``X``, next to the
    #: simulated truth the rows use.
    asf_analytic: float

    columns: t.ClassVar[tuple[str, ...]] = tuple(
        f.name for f in dataclasses.fields(MetricsRow)
    )

    def row(self, estimator: str, parameter: str) -> MetricsRow:
        for row in self.rows:
            if row.estimator == estimator and row.parameter == parameter:
                return row

        raise KeyError((estimator, parameter))

    def failure_count(self, estimator: str) -> int:
        failures = [r.failures for r in self.rows if r.estimator == estimator]
        return max(failures, default=0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [dataclasses.astuple(r) for r in self.rows], columns=list(self.columns)
        )

    def to_csv(
        self, target: str | os.PathLike[str] | t.IO[str] | None = None
    ) -> str | None:
        """Write the table as CSV, or return the text if no ``target``
        is given.
        """
        out = self.to_frame().to_csv(target, index=False, float_format="%.6g")
        return t.cast(t.Optional[str], out)

    def to_json(self) -> str:
        return _CompactJSON.dumps(
            {
                "config": self.config.to_dict(),
                "asf_analytic": self.asf_analytic,
                "rows": [dataclasses.asdict(r) for r in self.rows],
            }
        )


@dataclasses.dataclass(frozen=True)
class _Outcome:
    estimates: np.ndarray | None
    rejections: np.ndarray | None


def _truths(
    config: DgpConfig, names: t.Sequence[str], asf: float, semiparametric: bool
) -> np.ndarray:
    scale = config.alpha1 if semiparametric else 1.0
    values = {
        "alpha0": config.alpha0,
        "alpha1": config.alpha1,
        "beta": config.beta / scale,
        "rho": config.rho / scale,
        "asf": asf,
    }
    return np.array([values[n] for n in names])


def _select(fit: FitResult, data: Dataset, names: t.Sequence[str]) -> list[int]:
    positions = {"alpha0": 0, "alpha1": 1, "beta": data.k}

    if len(fit.theta.rho):
        positions["rho"] = data.k + data.p

    return [positions.get(n, -1) for n in names]


def _pick(
    values: np.ndarray, asf: float, names: t.Sequence[str], positions: list[int]
) -> np.ndarray:
    out = [
        asf if n == "asf" else (values[i] if i >= 0 else math.nan)
        for n, i in zip(names, positions)
    ]
    return np.array(out)


def _run_estimator(
    name: EstimatorName,
    sample: SimSample,
    config: ExperimentConfig,
    truths: np.ndarray,
    seed: int,
) -> _Outcome:
    data = sample.dataset
    estimator = name.estimator()
    names = name.parameters()
    failed = _Outcome(None, None)

    if name is EstimatorName.CF0:
        controls: t.Any = sample.m_v_true
    elif name is EstimatorName.ML:
        controls = None
    else:
        controls = estimator.make_controls(data)

    try:
        fit = estimator.fit(data, controls)
    except CollinearityError:
        if name is not EstimatorName.CF0:
            raise

        # the true control is collinear with (Z, D) in the linear design
        logger.warning("CF0 control is collinear, falling back to the plain fit.")
        fit = ControlFunctionEstimator(with_controls=False).fit(data)

    if not fit.converged:
        return failed

    x_bar = data.x.mean(axis=0)
    asf = estimator.asf(fit, data, x_bar, controls)
    positions = _select(fit, data, names)
    params = fit.theta.params

    if np.any(np.abs(params) > EXPLOSION_BOUND):
        return failed

    if name.uses_fisher_cov:
        cov = CovarianceEstimate.from_fit(fit)
        se_params = cov.se
        grad = asf_gradient(fit.theta, x_bar)
        se_asf = math.sqrt(max(float(grad @ fit.fisher_cov @ grad), 0.0))
    elif name.semiparametric:
        # the link has no closed form, so the ASF is bootstrapped with theta
        def procedure(resample: Dataset) -> np.ndarray:
            resample_controls = estimator.make_controls(resample)
            result = estimator.fit(resample, resample_controls)

            if not result.converged:
                return np.full(params.shape[0] + 1, np.nan)

            value = estimator.asf(result, resample, x_bar, resample_controls)
            return np.append(result.theta.params, value)

        center = np.append(params, asf)
        cov = pairs_bootstrap(data, procedure, config.boot_b_np, seed, center)
        se_params = cov.se[:-1]
        se_asf = float(cov.se[-1])
    else:
        cov = pairs_bootstrap(data, estimator, config.boot_b, seed, fit.theta)
        se_params = cov.se
        grad = asf_gradient(fit.theta, x_bar)
        se_asf = math.sqrt(max(float(grad @ cov.sigma @ grad) / cov.n_obs, 0.0))

    estimates = _pick(params, asf, names, positions)
    se = _pick(se_params, se_asf, names, positions)
    tests = t_statistics(estimates, np.diag(se * se), truths)
    return _Outcome(estimates, tests.rejections())


def _replicate(
    config: ExperimentConfig, r: int, asf_truth: float
) -> dict[EstimatorName, _Outcome]:
    seed = derive_seed(config.base_seed, r)
    sample = generate(dataclasses.replace(config.dgp, seed=seed))
    out = {}

    for j, name in enumerate(config.estimators):
        truths = _truths(config.dgp, name.parameters(), asf_truth, name.semiparametric)

        try:
            outcome = _run_estimator(name, sample, config, truths, derive_seed(seed, j))
            out[name] = outcome
        except RankCFError as e:
            logger.info("Replication %d, %s failed: %s", r, name.value, e)
            out[name] = _Outcome(None, None)

    logger.debug("Replication %d done.", r)
    return out


def run_experiment(config: ExperimentConfig) -> MetricsTable:
    """Run every replication of ``config`` and aggregate the metrics.
    Failed replications don't enter the moments but are counted. The
    table is the same for any number of threads.
    """
    dgp = config.dgp
    x_mean = dgp.population_mean_x()
    asf_truth = simulate_asf(
        dgp, x_mean[1], x_mean[2], draws=config.asf_draws, seed=config.base_seed
    )
    asf_analytic = true_asf(dgp, x_mean[1], x_mean[2])
    logger.info(
        "ASF truth %.4f by simulation, %.4f in closed form.", asf_truth, asf_analytic
    )

    def task(r: int) -> dict[EstimatorName, _Outcome]:
        return _replicate(config, r, asf_truth)

    if config.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(task, range(config.replications)))
    else:
        results = [task(r) for r in range(config.replications)]

    rows = []

    for name in config.estimators:
        names = name.parameters()
        truths = _truths(dgp, names, asf_truth, name.semiparametric)
        good = [res[name] for res in results if res[name].estimates is not None]
        failures = config.replications - len(good)
        estimates = np.array([o.estimates for o in good]).reshape(-1, len(names))
        rejected = np.array([o.rejections for o in good]).reshape(-1, len(names))

        for j, parameter in enumerate(names):
            # rho is missing where the CF0 fit fell back to no control
            finite = np.isfinite(estimates[:, j])
            moments = [math.nan] * 4

            if finite.any():
                s = summarize(estimates[finite, j], truths[j], rejected[finite, j])
                moments = [float(v[0]) for v in (s.mean, s.std, s.rmse, s.size)]

            rows.append(
                MetricsRow(name.value, parameter, float(truths[j]), *moments, failures)
            )

        if failures:
            logger.warning(
                "%s failed in %d of %d replications.",
                name.value,
                failures,
                config.replications,
            )

    return MetricsTable(rows=tuple(rows), config=config, asf_analytic=asf_analytic)
