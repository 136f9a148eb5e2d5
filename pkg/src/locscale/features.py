"""Engineered covariate columns: seasonal harmonics and B-spline bases.

Both helpers return a (matrix, names) pair ready for the
``extra_columns`` hook of the dataset constructors.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline


def harmonic_features(day, frequencies=(1, 2)):
    """Sine and cosine pairs of the yearly cycle.

    ``day`` is the day of the year; frequency k contributes the columns
    sin(2 pi k day / 365) and cos(2 pi k day / 365), named ``sin<k>`` and
    ``cos<k>``.
    """
    day = np.asarray(day, dtype=float)
    freqs = tuple(int(k) for k in frequencies)
    if not freqs:
        raise ValueError("at least one frequency is required")
    if any(k <= 0 for k in freqs):
        raise ValueError("frequencies must be positive integers")
    cols = []
    names = []
    for k in freqs:
        angle = 2.0 * np.pi * k * day / 365.0
        cols.append(np.sin(angle))
        names.append(f"sin{k}")
        cols.append(np.cos(angle))
        names.append(f"cos{k}")
    return np.column_stack(cols), tuple(names)


def spline_features(x, n_inner=4, degree=3, boundary=None, prefix="s"):
    """Clamped B-spline design matrix over the range of ``x``.

    Interior knots sit at equispaced quantile positions between the
    boundary knots (the data range by default); the boundary knots repeat
    ``degree + 1`` times so the basis spans polynomials at the ends and the
    columns sum to one everywhere inside the range.  Columns are named
    ``<prefix>1`` onward.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be one-dimensional")
    if np.unique(x).size < degree + 1:
        raise ValueError(f"need at least {degree + 1} distinct values for degree {degree}")
    if n_inner < 0:
        raise ValueError("n_inner must be nonnegative")
    lo, hi = boundary if boundary is not None else (float(x.min()), float(x.max()))
    if not hi > lo:
        raise ValueError("boundary must satisfy lo < hi")
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("x must lie inside the boundary knots")
    inner = np.quantile(x, np.linspace(0.0, 1.0, n_inner + 2)[1:-1]) if n_inner else np.array([])
    inner = inner[(inner > lo) & (inner < hi)]
    knots = np.concatenate([np.repeat(lo, degree + 1), inner, np.repeat(hi, degree + 1)])
    design = BSpline.design_matrix(x, knots, degree, extrapolate=False).toarray()
    # the right boundary belongs to the last interval: the final basis
    # function evaluates to one there, which design_matrix already handles
    names = tuple(f"{prefix}{j + 1}" for j in range(design.shape[1]))
    return design, names
