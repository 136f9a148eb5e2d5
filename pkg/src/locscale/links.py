"""Error distributions on the transformed scale.

Each link bundles the cdf, survivor function, quantile, log-density and
log-density derivative of a fixed continuous distribution ``F_Z``.  Model
probabilities are ``F_Z`` evaluated at the transformed response, so the
interpretation of the linear predictors depends on which link is chosen:
log-odds ratios under the logistic link, log-hazard ratios under the
minimum-extreme-value link, and so on.

All evaluations accept scalars or arrays and are safe in the far tails:
survivor functions are computed directly rather than as ``1 - cdf``.
"""

from __future__ import annotations

import numpy as np
from scipy import special

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class Link:
    """Base class; concrete links override the distribution functions."""

    name: str = ""

    def cdf(self, z):
        raise NotImplementedError

    def sf(self, z):
        """Survivor function 1 - cdf(z), computed without cancellation."""
        raise NotImplementedError

    def quantile(self, p):
        """Inverse cdf. Raises ValueError at p <= 0 or p >= 1 (infinite)."""
        raise NotImplementedError

    def log_density(self, z):
        raise NotImplementedError

    def density(self, z):
        return np.exp(self.log_density(z))

    def log_density_deriv(self, z):
        """Derivative of log f, i.e. f'(z) / f(z)."""
        raise NotImplementedError

    def _check_prob(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise ValueError(
                f"{self.name} quantile requires 0 < p < 1; "
                "the quantile is infinite at the endpoints"
            )
        return p

    def __repr__(self):
        return f"Link({self.name!r})"


class ProbitLink(Link):
    """Standard normal errors."""

    name = "probit"

    def cdf(self, z):
        return special.ndtr(np.asarray(z, dtype=float))

    def sf(self, z):
        return special.ndtr(-np.asarray(z, dtype=float))

    def quantile(self, p):
        return special.ndtri(self._check_prob(p))

    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        return -0.5 * z * z - _LOG_SQRT_2PI

    def log_density_deriv(self, z):
        return -np.asarray(z, dtype=float)


class LogitLink(Link):
    """Standard logistic errors."""

    name = "logit"

    def cdf(self, z):
        return special.expit(np.asarray(z, dtype=float))

    def sf(self, z):
        return special.expit(-np.asarray(z, dtype=float))

    def quantile(self, p):
        return special.logit(self._check_prob(p))

    def log_density(self, z):
        # log f = -z - 2 log(1 + exp(-z)), stable on both tails
        z = np.asarray(z, dtype=float)
        return -np.abs(z) - 2.0 * np.log1p(np.exp(-np.abs(z)))

    def log_density_deriv(self, z):
        return 1.0 - 2.0 * special.expit(np.asarray(z, dtype=float))


class CloglogLink(Link):
    """Minimum extreme value (Gompertz) errors: F(z) = 1 - exp(-exp(z)).

    Linear predictors act multiplicatively on the hazard of the
    transformed response, so coefficients are log-hazard ratios.
    """

    name = "cloglog"

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        return -np.expm1(-np.exp(z))

    def sf(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(-np.exp(z))

    def quantile(self, p):
        p = self._check_prob(p)
        return np.log(-np.log1p(-p))

    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        return z - np.exp(z)

    def log_density_deriv(self, z):
        z = np.asarray(z, dtype=float)
        return 1.0 - np.exp(z)


class LoglogLink(Link):
    """Maximum extreme value (Gumbel) errors: F(z) = exp(-exp(-z))."""

    name = "loglog"

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(-np.exp(-z))

    def sf(self, z):
        z = np.asarray(z, dtype=float)
        return -np.expm1(-np.exp(-z))

    def quantile(self, p):
        p = self._check_prob(p)
        return -np.log(-np.log(p))

    def log_density(self, z):
        z = np.asarray(z, dtype=float)
        return -z - np.exp(-z)

    def log_density_deriv(self, z):
        z = np.asarray(z, dtype=float)
        return -1.0 + np.exp(-z)


_LINKS = {
    "probit": ProbitLink(),
    "logit": LogitLink(),
    "cloglog": CloglogLink(),
    "loglog": LoglogLink(),
}

LINK_NAMES = tuple(sorted(_LINKS))


def get_link(name) -> Link:
    """Look up a link by name ("probit", "logit", "cloglog", "loglog")."""
    if isinstance(name, Link):
        return name
    try:
        return _LINKS[str(name).lower()]
    except KeyError:
        raise ValueError(
            f"unknown link {name!r}; expected one of {', '.join(LINK_NAMES)}"
        ) from None
