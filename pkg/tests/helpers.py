"""Shared builders for the test suite."""

import numpy as np

from locscale.bases import BasisSpec
from locscale.data import make_dataset
from locscale.likelihood import ModelSpec
from locscale.simulate import chi2_sample


def log_chi2_dataset(n, beta, gamma, n_noise=0, seed=0, replicate=0, order=6):
    """Chi-squared location-scale sample fitted on the log response scale.

    Returns (dataset, basis).  The basis support pads the observed range of
    log(y) by two percent on each side so boundary constraints stay inactive.
    """
    ds = chi2_sample(n, beta, gamma, n_noise=n_noise, seed=seed, replicate=replicate)
    y = np.array([d.value for d in ds.responses])
    w = np.log(y)
    dsl = make_dataset(w, ds.x, ds.colnames, kind="exact")
    lo, hi = float(w.min()), float(w.max())
    pad = 0.02 * (hi - lo)
    basis = BasisSpec(kind="bernstein", order=order, support=(lo - pad, hi + pad))
    return dsl, basis


def gaussian_dataset(n=120, beta=0.8, seed=0):
    """Normal response with one uniform covariate shifting the mean."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, 1))
    y = 0.5 + beta * x[:, 0] + rng.standard_normal(n)
    ds = make_dataset(y, x, ("x1",), kind="exact")
    lo, hi = float(y.min()), float(y.max())
    pad = 0.05 * (hi - lo)
    basis = BasisSpec(kind="bernstein", order=5, support=(lo - pad, hi + pad))
    return ds, basis


def simple_spec(basis, link="probit", location=("x1",), scale=()):
    return ModelSpec(basis=basis, link=link, location=location, scale=scale)
