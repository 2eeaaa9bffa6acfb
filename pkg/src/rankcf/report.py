from __future__ import annotations

import logging
import typing as t

from ._json import _CompactJSON
from .exc import ShapeError
from .inference import AsfEstimate
from .inference import CovarianceEstimate
from .inference import t_statistics
from .liml import FitResult

logger = logging.getLogger(__name__)


def _names(fit: FitResult, names: t.Sequence[str] | None) -> list[str]:
    k, p, q = fit.theta.shape

    if names is None:
        exog = ["const", *(f"z{j}" for j in range(1, k))]
        endog = ["d"] if p == 1 else [f"d{j + 1}" for j in range(p)]
        rho = ["rho"] if q == 1 else [f"rho_{j + 1}" for j in range(q)]
        names = [*exog, *endog, *rho]

    if len(names) != k + p + q:
        raise ShapeError("One name per coefficient is required.")

    return list(names)


def build_fit_report(
    fit: FitResult,
    cov: CovarianceEstimate | None = None,
    asf: AsfEstimate | None = None,
    names: t.Sequence[str] | None = None,
) -> dict[str, t.Any]:
    """The report of :func:`emit_fit_report` as a dict. Keys keep the
    order in which they are written.
    """
    params = fit.theta.params
    warnings = []

    if cov is None:
        se: list[float | None] = [None] * len(params)
        tstats: list[float | None] = [None] * len(params)
        degenerate: list[bool | None] = [None] * len(params)
        warnings.append("no covariance estimate, standard errors are missing")
        logger.warning("Reporting a fit without covariance estimate.")
    else:
        test = t_statistics(fit.theta, cov, 0.0)
        se = [float(v) for v in test.se]
        tstats = [float(v) for v in test.statistics]
        degenerate = [bool(v) for v in test.degenerate]

    if not fit.converged:
        warnings.append("the estimator did not converge")

    coefficients = [
        {
            "name": name,
            "estimate": float(value),
            "se": s,
            "t": ts,
            "degenerate": flag,
        }
        for name, value, s, ts, flag in zip(
            _names(fit, names), params, se, tstats, degenerate
        )
    ]
    report: dict[str, t.Any] = {
        "link": fit.link,
        "n_obs": fit.n_obs,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "loglik": fit.loglik,
        "score_norm": fit.score_norm,
        "design_condition": fit.design_condition,
        "coefficients": coefficients,
        "covariance": None,
        "asf": None,
        "warnings": warnings,
    }

    if cov is not None:
        report["covariance"] = {
            "method": "bootstrap" if cov.b_used else "fisher",
            "b_used": cov.b_used,
            "b_failed": cov.b_failed,
            "sigma": cov.sigma,
        }

    if asf is not None:
        report["asf"] = {"x": list(asf.x), "value": asf.value, "se": asf.se}

    return report


def emit_fit_report(
    fit: FitResult,
    cov: CovarianceEstimate | None = None,
    asf: AsfEstimate | None = None,
    names: t.Sequence[str] | None = None,
) -> str:
    """Serialize a fit as JSON: named coefficients with standard errors
    and t statistics against 0, convergence diagnostics, the covariance
    and its bootstrap failure counts, and optionally an ASF value.
    Without ``cov`` the standard errors are ``null`` and a warning is
    listed. A coefficient with a zero standard error, such as one fixed
    by a normalization, is marked ``degenerate`` and its infinite t
    statistic is written as ``null``. Controls are named ``rho``, or
    ``rho_1, rho_2, ...`` with several endogenous columns.
    """
    return _CompactJSON.dumps(build_fit_report(fit, cov, asf, names))
