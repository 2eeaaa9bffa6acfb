from __future__ import annotations

import typing as t

import numpy as np
from scipy import special

from ._normal import mills_ratio
from ._normal import norm_cdf
from ._normal import norm_pdf
from .exc import ConfigError

#: Probabilities are kept inside ``[CLAMP, 1 - CLAMP]`` in logs and
#: ratios.
CLAMP = 1e-12


class LinkFamily:
    """Distribution ``F`` of the normalized innovation in the binary
    response model. Subclasses must implement :meth:`cdf`, :meth:`pdf`
    and :meth:`dpdf`.

    The base class derives the per-observation score factor
    :meth:`psi` and its derivative :meth:`psi_dot` from those three
    functions; subclasses override them with closed forms where the
    general expressions lose precision.
    """

    #: Name used on the command line and in reports.
    name: t.ClassVar[str] = ""

    def cdf(self, x: np.ndarray) -> np.ndarray:
        """Returns ``F(x)``."""
        raise NotImplementedError()

    def pdf(self, x: np.ndarray) -> np.ndarray:
        """Returns the density ``f(x)``."""
        raise NotImplementedError()

    def dpdf(self, x: np.ndarray) -> np.ndarray:
        """Returns the derivative ``f'(x)`` of the density."""
        raise NotImplementedError()

    def clamped_cdf(self, x: np.ndarray) -> np.ndarray:
        return np.clip(self.cdf(x), CLAMP, 1.0 - CLAMP)

    def loglik_obs(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``y ln F(w) + (1 - y) ln(1 - F(w))`` per observation."""
        p = self.clamped_cdf(w)
        return t.cast(np.ndarray, y * np.log(p) + (1.0 - y) * np.log1p(-p))

    def psi(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``(y - F(w)) f(w) / (F(w) (1 - F(w)))``, the derivative of
        :meth:`loglik_obs` with respect to the index ``w``.
        """
        p = self.clamped_cdf(w)
        return t.cast(np.ndarray, (y - p) * self.pdf(w) / (p * (1.0 - p)))

    def psi_dot(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Derivative of :meth:`psi` with respect to ``w``."""
        p = self.clamped_cdf(w)
        f = self.pdf(w)
        v = p * (1.0 - p)
        curvature = (self.dpdf(w) * v - f * f * (1.0 - 2.0 * p)) / (v * v)
        return t.cast(np.ndarray, -f * f / v + (y - p) * curvature)


class ProbitLink(LinkFamily):
    """Standard normal ``F = Phi``. The score factor is written with the
    inverse Mills ratio ``lambda = phi / Phi`` and ``q = 2y - 1``:
    ``psi = q lambda(q w)`` and ``psi_dot = -lambda(q w) (q w + lambda(q w))``,
    which stay finite far in the tails.
    """

    name = "probit"

    def cdf(self, x: np.ndarray) -> np.ndarray:
        return norm_cdf(x)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return norm_pdf(x)

    def dpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return t.cast(np.ndarray, -x * norm_pdf(x))

    def psi(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        q = 2.0 * np.asarray(y, dtype=float) - 1.0
        return t.cast(np.ndarray, q * mills_ratio(q * w))

    def psi_dot(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        qw = (2.0 * np.asarray(y, dtype=float) - 1.0) * w
        lam = mills_ratio(qw)
        return t.cast(np.ndarray, -lam * (qw + lam))


class LogitLink(LinkFamily):
    """Logistic ``F = Lambda``, for which ``psi = y - Lambda(w)`` and
    ``psi_dot = -Lambda(w) (1 - Lambda(w))``.
    """

    name = "logit"

    def cdf(self, x: np.ndarray) -> np.ndarray:
        return t.cast(np.ndarray, special.expit(x))

    def pdf(self, x: np.ndarray) -> np.ndarray:
        p = special.expit(x)
        return t.cast(np.ndarray, p * (1.0 - p))

    def dpdf(self, x: np.ndarray) -> np.ndarray:
        p = special.expit(x)
        return t.cast(np.ndarray, p * (1.0 - p) * (1.0 - 2.0 * p))

    def psi(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        return t.cast(np.ndarray, y - special.expit(w))

    def psi_dot(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        p = special.expit(w)
        return t.cast(np.ndarray, -p * (1.0 - p))


_LINKS: dict[str, type[LinkFamily]] = {"probit": ProbitLink, "logit": LogitLink}


def get_link(link: str | LinkFamily) -> LinkFamily:
    """Look up a link by name, passing instances through."""
    if isinstance(link, LinkFamily):
        return link

    try:
        return _LINKS[link]()
    except KeyError:
        raise ConfigError(
            f"Unknown link {link!r}, expected one of {', '.join(_LINKS)}."
        ) from None
