from __future__ import annotations

import logging
import typing as t

import numpy as np

from .control import ControlFunction
from .control import QuantileFamily
from .control import build
from .dataset import Dataset
from .exc import ConfigError
from .first_stage import FirstStageFit
from .first_stage import FirstStageKind
from .first_stage import fit_local_linear
from .first_stage import fit_ols
from .liml import Controls
from .liml import FitResult
from .liml import NewtonOptions
from .liml import asf_parametric
from .liml import fit as fit_parametric
from .links import get_link
from .semiparam import SemiparamSpec
from .semiparam import asf_nonparam
from .semiparam import fit_semiparam

logger = logging.getLogger(__name__)

#: Link name that selects the semiparametric fit.
SEMIPARAMETRIC = "np"


class ControlFunctionEstimator:
    """The full estimation procedure: a first stage for every
    endogenous column, a rank-based control from each set of residuals,
    and a binary response fit augmented with all controls.

    Calling :meth:`fit` on a resample re-runs every step, which is what
    :func:`~rankcf.inference.pairs_bootstrap` needs.

    .. code-block:: python

        estimator = ControlFunctionEstimator(first_stage="ols")
        result = estimator.fit(data)

    :param first_stage: ``"ols"`` or ``"local-linear"``.
    :param control: Quantile family of the controls, or its command
        line form such as ``"skew:0.3"``.
    :param link: ``"probit"``, ``"logit"`` or ``"np"`` for the
        semiparametric fit.
    :param with_controls: ``False`` fits the plain binary response model
        that ignores endogeneity.
    """

    #: First stage applied to each endogenous column.
    default_first_stage: FirstStageKind = FirstStageKind.LOCAL_LINEAR

    #: Quantile family turning residual ranks into controls.
    default_control: QuantileFamily = QuantileFamily.normal()

    #: Link of the binary response model.
    default_link: str = "probit"

    #: Settings for ``link="np"``.
    default_semiparam: SemiparamSpec = SemiparamSpec()

    #: Settings of the Newton solver for parametric links.
    default_newton: NewtonOptions = NewtonOptions()

    def __init__(
        self,
        first_stage: FirstStageKind | str | None = None,
        control: QuantileFamily | str | None = None,
        link: str | None = None,
        semiparam: SemiparamSpec | None = None,
        newton: NewtonOptions | None = None,
        first_stage_bandwidth: float | None = None,
        with_controls: bool = True,
    ):
        if first_stage is None:
            first_stage = self.default_first_stage

        try:
            self.first_stage_kind = FirstStageKind(first_stage)
        except ValueError:
            raise ConfigError(f"Unknown first stage {first_stage!r}.") from None

        if control is None:
            control = self.default_control
        elif isinstance(control, str):
            control = QuantileFamily.parse(control)

        self.control: QuantileFamily = control

        if link is None:
            link = self.default_link

        if link != SEMIPARAMETRIC:
            get_link(link)

        self.link: str = link

        if semiparam is None:
            semiparam = self.default_semiparam

        self.semiparam: SemiparamSpec = semiparam

        if newton is None:
            newton = self.default_newton

        self.newton: NewtonOptions = newton
        self.first_stage_bandwidth = first_stage_bandwidth
        self.with_controls = with_controls

    @property
    def semiparametric(self) -> bool:
        return self.link == SEMIPARAMETRIC

    def __repr__(self) -> str:
        return (
            f"<{type(self).__name__} first_stage={self.first_stage_kind.value}"
            f" control={self.control} link={self.link}"
            f" with_controls={self.with_controls}>"
        )

    def first_stage(self, data: Dataset) -> list[FirstStageFit]:
        """Fit the reduced form of every endogenous column on ``Z``."""
        out = []

        for j in range(data.p):
            if self.first_stage_kind is FirstStageKind.OLS:
                out.append(fit_ols(data.z, data.d[:, j]))
            else:
                out.append(
                    fit_local_linear(
                        data.z, data.d[:, j], bandwidth=self.first_stage_bandwidth
                    )
                )

        return out

    def make_controls(self, data: Dataset) -> list[ControlFunction]:
        """One control per endogenous column, built from its first stage
        residuals.
        """
        return [build(f.residuals, self.control) for f in self.first_stage(data)]

    def fit(self, data: Dataset, controls: Controls = None) -> FitResult:
        """Run the whole procedure on ``data``. Pass ``controls`` to
        skip the first stage, for example to use the true ``m(V)`` of a
        simulated sample.
        """
        if controls is None and self.with_controls:
            controls = self.make_controls(data)
        elif not self.with_controls:
            controls = None

        if self.semiparametric:
            return fit_semiparam(data, controls, self.semiparam)

        return fit_parametric(data, controls, self.link, self.newton)

    def __call__(self, data: Dataset) -> FitResult:
        return self.fit(data)

    def asf(
        self,
        result: FitResult,
        data: Dataset,
        x: t.Any = None,
        controls: Controls = None,
    ) -> float:
        """Average structural function of a fit at ``x``, by default the
        sample mean of ``X``. The semiparametric version needs the
        controls of ``data``; they are rebuilt when not given.
        """
        if x is None:
            x = data.x.mean(axis=0)

        x = np.asarray(x, dtype=float)

        if not self.semiparametric:
            return asf_parametric(result.theta, x, self.link)

        if controls is None and self.with_controls:
            controls = self.make_controls(data)

        return asf_nonparam(result.theta, data, controls, x, self.semiparam)
