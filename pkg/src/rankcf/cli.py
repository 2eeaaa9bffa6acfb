"""Command line interface.

.. code-block:: text

    rankcf fit --data sample.csv --endogenous d --exogenous z --boot 499
    rankcf asf --data sample.csv --endogenous d --exogenous z --at 0,1
    rankcf profile-lambda --data sample.csv --endogenous d --exogenous z
    rankcf mc --config experiment.json --out table.csv

Exit status is 0 on success, 2 for unreadable data, 3 for numerical
failures including fits that don't converge, and 4 for invalid options.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import re
import sys
import typing as t

import numpy as np

from ._json import _CompactJSON
from .control import ControlFunction
from .dataset import Dataset
from .dataset import Schema
from .dataset import parse_csv
from .estimator import SEMIPARAMETRIC
from .estimator import ControlFunctionEstimator
from .exc import ConfigError
from .exc import DataError
from .exc import RankCFError
from .first_stage import FirstStageKind
from .harness import ExperimentConfig
from .harness import run_experiment
from .inference import AsfEstimate
from .inference import CovarianceEstimate
from .inference import delta_method_asf
from .inference import pairs_bootstrap
from .liml import FitResult
from .liml import profile_loglik_lambda
from .report import emit_fit_report
from .semiparam import SemiparamSpec

logger = logging.getLogger(__name__)

#: Default bootstrap replications for parametric and semiparametric fits.
DEFAULT_BOOT = 499
DEFAULT_BOOT_NP = 99

#: Exit status when a fit finishes without converging.
NOT_CONVERGED = 3


class _ArgumentParser(argparse.ArgumentParser):
    def __init__(self, *args: t.Any, **kwargs: t.Any) -> None:
        super().__init__(*args, **kwargs)
        # "-0.2,0,0.2" is a value, not an option
        self._negative_number_matcher = re.compile(r"^-\.?\d")

    def error(self, message: str) -> t.NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


def _floats(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {value!r}") from None


def _names(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _trim(value: str) -> tuple[float, float]:
    values = _floats(value)

    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected 'low,high', got {value!r}")

    return values[0], values[1]


def _common() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--seed", type=int, default=None, help="Random seed.")
    parser.add_argument(
        "--threads", type=int, default=1, help="Worker threads for resampling."
    )
    parser.add_argument("--out", default=None, help="Output file, stdout if omitted.")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="More log output."
    )
    return parser


def _data_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--data", required=True, help="CSV file with a header row.")
    parser.add_argument("--outcome", default="y", help="Binary outcome column.")
    parser.add_argument(
        "--endogenous",
        type=_names,
        default=["d"],
        help="Comma separated endogenous columns.",
    )
    parser.add_argument(
        "--exogenous",
        type=_names,
        default=[],
        help="Comma separated exogenous columns, an intercept is added.",
    )
    parser.add_argument(
        "--first-stage",
        choices=[k.value for k in FirstStageKind],
        default=FirstStageKind.LOCAL_LINEAR.value,
    )
    parser.add_argument(
        "--first-stage-bandwidth",
        type=float,
        default=None,
        help="Local linear bandwidth, Silverman's rule if omitted.",
    )
    return parser


def _fit_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--link", choices=["probit", "logit", SEMIPARAMETRIC], default="probit"
    )
    parser.add_argument(
        "--control",
        default="normal",
        help="normal, skew:<lambda>, identity, or none for no control.",
    )
    parser.add_argument(
        "--boot",
        type=int,
        default=None,
        help=(
            f"Bootstrap replications, {DEFAULT_BOOT} ({DEFAULT_BOOT_NP} with"
            " --link np) if omitted, 0 to skip."
        ),
    )
    parser.add_argument(
        "--boot-seed", type=int, default=None, help="Bootstrap seed, --seed if omitted."
    )
    parser.add_argument(
        "--trim", type=_trim, default=(0.01, 0.99), help="Index quantiles kept."
    )
    parser.add_argument("--link-bandwidth", type=float, default=None)
    return parser


def make_parser() -> argparse.ArgumentParser:
    common = _common()
    data = _data_options()
    fit = _fit_options()
    parser = _ArgumentParser(
        prog="rankcf",
        description="Binary response models with rank-based control functions.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser(
        "fit", parents=[common, data, fit], help="Fit a model to a CSV file."
    )
    p.add_argument(
        "--asf", action="store_true", help="Also report the ASF at the mean of X."
    )
    p.set_defaults(func=_cmd_fit)

    p = commands.add_parser(
        "asf", parents=[common, data, fit], help="Average structural function."
    )
    p.add_argument(
        "--at",
        type=_floats,
        default=None,
        help="Values of the non-intercept regressors, the sample mean if omitted.",
    )
    p.set_defaults(func=_cmd_asf)

    p = commands.add_parser(
        "profile-lambda",
        parents=[common, data],
        help="Profile likelihood over the skewness of the control.",
    )
    p.add_argument("--link", choices=["probit", "logit"], default="probit")
    p.add_argument(
        "--grid",
        type=_floats,
        default=[float(v) for v in np.linspace(-0.8, 0.8, 17)],
        help="Comma separated skewness values in (-1, 1).",
    )
    p.set_defaults(func=_cmd_profile)

    p = commands.add_parser("mc", parents=[common], help="Run a Monte Carlo study.")
    p.add_argument("--config", required=True, help="Experiment JSON file.")
    p.add_argument(
        "--full-scale",
        action="store_true",
        help="1000 replications with 499 and 99 bootstrap draws.",
    )
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.set_defaults(func=_cmd_mc)

    return parser


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)

        if not text.endswith("\n"):
            sys.stdout.write("\n")

        return

    with open(out, "w", encoding="utf-8") as f:
        f.write(text)


def _load(args: argparse.Namespace) -> Dataset:
    schema = Schema(
        outcome=args.outcome,
        endogenous=tuple(args.endogenous),
        exogenous=tuple(args.exogenous),
    )

    try:
        return parse_csv(args.data, schema)
    except OSError as e:
        raise DataError(f"Can't read {args.data}: {e.strerror or e}") from e


def _estimator(args: argparse.Namespace) -> ControlFunctionEstimator:
    with_controls = args.control != "none"
    return ControlFunctionEstimator(
        first_stage=args.first_stage,
        control=args.control if with_controls else None,
        link=args.link,
        semiparam=SemiparamSpec(bandwidth=args.link_bandwidth, trim=args.trim),
        first_stage_bandwidth=args.first_stage_bandwidth,
        with_controls=with_controls,
    )


def _boot_count(args: argparse.Namespace) -> int:
    if args.boot is not None:
        if args.boot < 0:
            raise ConfigError("--boot must not be negative.")

        return int(args.boot)

    return DEFAULT_BOOT_NP if args.link == SEMIPARAMETRIC else DEFAULT_BOOT


@dataclasses.dataclass(frozen=True, eq=False)
class _Estimate:
    estimator: ControlFunctionEstimator
    fit: FitResult
    cov: CovarianceEstimate | None
    asf: AsfEstimate | None


def _estimate(
    args: argparse.Namespace, data: Dataset, x: np.ndarray | None = None
) -> _Estimate:
    estimator = _estimator(args)
    seed = args.seed if args.seed is not None else 0
    boot_seed = args.boot_seed if args.boot_seed is not None else seed
    b = _boot_count(args)

    def controls_for(sample: Dataset) -> list[ControlFunction] | None:
        return estimator.make_controls(sample) if estimator.with_controls else None

    controls = controls_for(data)
    fit = estimator.fit(data, controls)
    asf = None

    if x is not None:
        value = estimator.asf(fit, data, x, controls)
        asf = AsfEstimate(x=tuple(float(v) for v in x), value=value, se=None)

    if b == 0:
        logger.warning("Skipping the bootstrap, standard errors are not available.")
        return _Estimate(estimator, fit, None, asf)

    if asf is None or not estimator.semiparametric:
        cov = pairs_bootstrap(
            data, estimator, b, boot_seed, fit.theta, threads=args.threads
        )

        if asf is not None:
            asf = delta_method_asf(fit.theta, cov, np.asarray(asf.x))

        return _Estimate(estimator, fit, cov, asf)

    point = asf

    # the estimated link has no closed form gradient, resample the ASF too
    def procedure(sample: Dataset) -> np.ndarray:
        sample_controls = controls_for(sample)
        result = estimator.fit(sample, sample_controls)

        if not result.converged:
            return np.full(len(fit.theta.params) + 1, np.nan)

        value = estimator.asf(result, sample, point.x, sample_controls)
        return np.append(result.theta.params, value)

    center = np.append(fit.theta.params, point.value)
    full = pairs_bootstrap(data, procedure, b, boot_seed, center, threads=args.threads)
    cov = CovarianceEstimate(
        sigma=full.sigma[:-1, :-1],
        b_used=full.b_used,
        b_failed=full.b_failed,
        n_obs=full.n_obs,
    )
    asf = dataclasses.replace(point, se=float(full.se[-1]))
    return _Estimate(estimator, fit, cov, asf)


def _point(data: Dataset, at: list[float] | None) -> np.ndarray:
    if at is None:
        return t.cast(np.ndarray, data.x.mean(axis=0))

    if len(at) != data.k + data.p - 1:
        raise ConfigError(
            f"--at needs {data.k + data.p - 1} values, one per non-intercept"
            " regressor."
        )

    return np.array([1.0, *at])


def _cmd_fit(args: argparse.Namespace) -> int:
    data = _load(args)
    x = data.x.mean(axis=0) if args.asf else None
    result = _estimate(args, data, x)
    fit = result.fit
    report = emit_fit_report(fit, result.cov, result.asf, fit.theta.names(data))
    _write(report, args.out)
    return 0 if fit.converged else NOT_CONVERGED


def _cmd_asf(args: argparse.Namespace) -> int:
    data = _load(args)
    result = _estimate(args, data, _point(data, args.at))
    asf = t.cast(AsfEstimate, result.asf)
    document = {
        "x": list(asf.x),
        "value": asf.value,
        "se": asf.se,
        "link": result.fit.link,
        "converged": result.fit.converged,
    }
    _write(_CompactJSON.dumps(document), args.out)
    return 0 if result.fit.converged else NOT_CONVERGED


def _cmd_profile(args: argparse.Namespace) -> int:
    data = _load(args)
    estimator = ControlFunctionEstimator(
        first_stage=args.first_stage, first_stage_bandwidth=args.first_stage_bandwidth
    )
    residuals = np.column_stack([f.residuals for f in estimator.first_stage(data)])
    points = profile_loglik_lambda(data, residuals, args.link, args.grid)
    best = max(points, key=lambda p: p.loglik)
    document = {
        "link": args.link,
        "profile": [
            {"lambda": p.lam, "loglik": p.loglik, "converged": p.converged}
            for p in points
        ],
        "argmax": best.lam,
    }
    _write(_CompactJSON.dumps(document), args.out)
    return 0


def _cmd_mc(args: argparse.Namespace) -> int:
    try:
        with open(args.config, encoding="utf-8") as f:
            settings = json.load(f)
    except OSError as e:
        raise ConfigError(f"Can't read {args.config}: {e.strerror or e}") from e
    except ValueError as e:
        raise ConfigError(f"Invalid JSON in {args.config}: {e}") from e

    if not isinstance(settings, dict):
        raise ConfigError("The experiment file must hold a JSON object.")

    config = ExperimentConfig.from_dict(settings)

    if args.full_scale:
        config = config.full_scale()

    overrides: dict[str, t.Any] = {}

    if args.seed is not None:
        overrides["base_seed"] = args.seed

    if args.threads > 1:
        overrides["threads"] = args.threads

    if overrides:
        config = ExperimentConfig.from_dict({**config.to_dict(), **overrides})

    table = run_experiment(config)
    fmt = args.format

    if fmt is None:
        fmt = "json" if args.out is not None and args.out.endswith(".json") else "csv"

    text = table.to_json() if fmt == "json" else t.cast(str, table.to_csv())
    _write(text, args.out)
    return 0


def main(argv: t.Sequence[str] | None = None) -> int:
    """Entry point of the ``rankcf`` command. Returns the exit status."""
    try:
        args = make_parser().parse_args(argv)
    except RankCFError as e:
        print(f"rankcf: error: {e}", file=sys.stderr)
        return e.exit_code

    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return int(args.func(args))
    except RankCFError as e:
        print(f"rankcf: error: {e}", file=sys.stderr)
        return e.exit_code
