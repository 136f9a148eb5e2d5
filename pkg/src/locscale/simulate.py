"""Synthetic data generators for simulation studies and tests.

The reference design draws two uniform covariates and passes a logistic
latent variable through a chi-squared(3) quantile so that, under the
logistic link, the transformation model recovers the generating location
and log-scale coefficients exactly.
"""

from __future__ import annotations

import numpy as np
from scipy import special, stats

from .data import Dataset, make_dataset


def _replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(replicate))))


def _covariates(n: int, n_noise: int, rng: np.random.Generator):
    x1 = rng.uniform(size=n)
    x2 = rng.uniform(size=n)
    cols = [x1, x2]
    names = ["x1", "x2"]
    for j in range(n_noise):
        cols.append(rng.uniform(size=n))
        names.append(f"x{3 + j}")
    return np.column_stack(cols), tuple(names)


def _chi2_response(mu: np.ndarray, log_s2: np.ndarray, rng: np.random.Generator):
    """Invert P(Y <= y | x) = expit(s h(y) - mu) with h = logit o chi2(3) cdf."""
    n = mu.size
    u = np.clip(rng.random(n), 1e-12, 1.0 - 1e-12)
    latent = (special.logit(u) + mu) / np.sqrt(np.exp(log_s2))
    return stats.chi2(df=3).ppf(special.expit(latent))


def chi2_sample(
    n: int,
    beta: float = 0.0,
    gamma: float = 0.0,
    n_noise: int = 0,
    seed: int = 0,
    replicate: int = 0,
) -> Dataset:
    """Continuous responses with linear location and log-scale effects.

    The data satisfy P(Y <= y | x) = expit(exp(gamma x2 / 2) h(y) - beta x1)
    with h(y) = logit(chi-squared(3) cdf at y), so a logistic-link fit with
    x1 in the location term and x2 in the scale term targets exactly
    (beta, gamma).  ``n_noise`` appends independent uniform columns
    x3, x4, ... that carry no signal.  The stream is a deterministic
    function of (seed, replicate).
    """
    rng = _replicate_rng(seed, replicate)
    x, names = _covariates(n, n_noise, rng)
    y = _chi2_response(beta * x[:, 0], gamma * x[:, 1], rng)
    return make_dataset(y, x, names, kind="exact")


def chi2_step_sample(
    n: int,
    delta_location: float = 0.0,
    delta_scale: float = 0.0,
    n_noise: int = 0,
    seed: int = 0,
    replicate: int = 0,
) -> Dataset:
    """Abrupt subgroup effects for partitioning studies.

    Observations with x1 > 1/2 get a location shift ``delta_location``;
    observations with x2 > 1/2 get a log-variance shift ``delta_scale``.
    With both deltas zero the response is independent of all covariates.
    """
    rng = _replicate_rng(seed, replicate)
    x, names = _covariates(n, n_noise, rng)
    mu = delta_location * (x[:, 0] > 0.5)
    log_s2 = delta_scale * (x[:, 1] > 0.5)
    y = _chi2_response(mu, log_s2, rng)
    return make_dataset(y, x, names, kind="exact")
