"""Synthetic samples from the binary response model with an
endogenous regressor,

.. code-block:: text

    Y = 1{alpha0 + alpha1 Z + beta D + U > 0},  D = pi(Z) + V,
    U = rho m(V) + E,  m(V) = Phi^-1(G(V)),  E ~ N(0, 1).
"""

from __future__ import annotations

import dataclasses
import enum
import math
import typing as t

import numpy as np
from scipy import stats

from .dataset import Dataset
from .exc import ConfigError


class PiShape(str, enum.Enum):
    """Reduced form ``pi(z)`` of the endogenous regressor."""

    LINEAR = "linear"
    QUADRATIC = "quadratic"

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self is PiShape.LINEAR:
            return z.copy()

        return t.cast(np.ndarray, z * z)

    def mean(self) -> float:
        """``E[pi(Z)]`` for standard normal ``Z``."""
        return 0.0 if self is PiShape.LINEAR else 1.0


class VDist(str, enum.Enum):
    """Distribution ``G`` of the reduced form error ``V``."""

    STD_NORMAL = "std_normal"
    #: Gamma with shape 2 and rate 2, shifted by its mean 1.
    CENTERED_GAMMA22 = "centered_gamma22"

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self is VDist.STD_NORMAL:
            return rng.standard_normal(n)

        return t.cast(np.ndarray, rng.gamma(shape=2.0, scale=0.5, size=n) - 1.0)

    def normal_scores(self, v: np.ndarray) -> np.ndarray:
        """``m(v) = Phi^-1(G(v))`` with the true cdf ``G``, so that
        ``m(V)`` is exactly standard normal.
        """
        if self is VDist.STD_NORMAL:
            return v.copy()

        gamma = stats.gamma(a=2.0, scale=0.5, loc=-1.0)
        # use the survival function in the upper half to keep precision
        lower = v <= gamma.median()
        out = np.empty_like(v)
        out[lower] = stats.norm.ppf(gamma.cdf(v[lower]))
        out[~lower] = stats.norm.isf(gamma.sf(v[~lower]))
        return out


@dataclasses.dataclass(frozen=True)
class DgpConfig:
    """Parameters of the simulation design. ``seed`` fully determines
    the sample drawn by :func:`generate`.
    """

    alpha0: float = 0.5
    alpha1: float = 1.0
    beta: float = 1.0
    rho: float = 0.5
    pi_shape: PiShape = PiShape.QUADRATIC
    v_dist: VDist = VDist.STD_NORMAL
    n: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "pi_shape", PiShape(self.pi_shape))
            object.__setattr__(self, "v_dist", VDist(self.v_dist))
        except ValueError as e:
            raise ConfigError(str(e)) from e

        for name in ("alpha0", "alpha1", "beta", "rho"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"'{name}' must be finite.")

        n: int | None

        try:
            n = int(self.n)
        except (TypeError, ValueError, OverflowError):
            n = None

        if isinstance(self.n, bool) or n is None or n != self.n or n < 2:
            raise ConfigError(f"Sample size must be an integer >= 2, got {self.n}.")

        object.__setattr__(self, "n", n)

        if not 0 <= self.seed < 2**64:
            raise ConfigError("'seed' must be a 64-bit unsigned integer.")

    @property
    def index_coefficients(self) -> np.ndarray:
        """``(alpha0, alpha1, beta)``, the coefficients of ``X``."""
        return np.array([self.alpha0, self.alpha1, self.beta])

    def population_mean_x(self) -> np.ndarray:
        """``E[X] = (1, E[Z], E[D])``."""
        return np.array([1.0, 0.0, self.pi_shape.mean()])

    @classmethod
    def from_dict(cls, data: t.Mapping[str, t.Any]) -> DgpConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names

        if unknown:
            raise ConfigError(f"Unknown DGP settings: {', '.join(sorted(unknown))}")

        return cls(**data)

    def to_dict(self) -> dict[str, t.Any]:
        out = dataclasses.asdict(self)
        out["pi_shape"] = self.pi_shape.value
        out["v_dist"] = self.v_dist.value
        return out


@dataclasses.dataclass(frozen=True, eq=False)
class SimSample:
    """A generated sample together with the latent quantities only the
    simulator knows.
    """

    dataset: Dataset
    v_true: np.ndarray
    m_v_true: np.ndarray
    e_true: np.ndarray


def generate(config: DgpConfig) -> SimSample:
    """Draw ``config.n`` observations. ``Z``, ``V`` and ``E`` are drawn
    in that order from a generator seeded with ``config.seed``.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n
    z = rng.standard_normal(n)
    v = config.v_dist.draw(rng, n)
    e = rng.standard_normal(n)
    m_v = config.v_dist.normal_scores(v)
    d = config.pi_shape(z) + v
    latent = (
        config.alpha0 + config.alpha1 * z + config.beta * d + config.rho * m_v + e
    )
    dataset = Dataset(
        y=(latent > 0).astype(float),
        z=np.column_stack((np.ones(n), z)),
        d=d,
        exog_names=("const", "z"),
        endog_names=("d",),
    )
    return SimSample(dataset=dataset, v_true=v, m_v_true=m_v, e_true=e)


def true_asf(config: DgpConfig, z: float, d: float) -> float:
    """Average structural function
    ``Phi((alpha0 + alpha1 z + beta d) / sqrt(1 + rho^2))``.
    """
    index = config.alpha0 + config.alpha1 * z + config.beta * d
    return float(stats.norm.cdf(index / math.sqrt(1.0 + config.rho**2)))


def simulate_asf(
    config: DgpConfig, z: float, d: float, draws: int = 1_000_000, seed: int = 0
) -> float:
    """Simulation estimate of ``P(Y = 1)`` with ``X`` held at ``(z, d)``
    while ``m(V)`` and ``E`` keep their distribution.
    """
    rng = np.random.default_rng(seed)
    v = config.v_dist.draw(rng, draws)
    e = rng.standard_normal(draws)
    latent = (
        config.alpha0
        + config.alpha1 * z
        + config.beta * d
        + config.rho * config.v_dist.normal_scores(v)
        + e
    )
    return float(np.mean(latent > 0))
