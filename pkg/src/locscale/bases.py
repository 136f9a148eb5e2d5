"""Monotone transformation bases.

The transformation ``h(y) = a(y)' theta`` maps the response to the scale of
the error distribution.  Monotonicity of ``h`` is guaranteed by linear order
constraints on ``theta``; every basis here reports its own constraint matrix
so the fitter never needs basis-specific logic.

Available kinds:

* ``bernstein``  -- Bernstein polynomials of a given order on a bounded
  support interval.  The basis functions sum to one everywhere, which is
  what makes the centered reparameterization below exact.
* ``loglinear``  -- ``theta1 + theta2 * log(y)`` for positive responses,
  the two-parameter family matching classical proportional-hazards and
  accelerated-failure-time forms.
* ``ordinal``    -- one step per category boundary for a response with K
  ordered levels (K-1 parameters).
* ``nonparametric`` -- like ``ordinal`` but with steps at a given grid of
  observed values; the discrete least-informative choice.

Discrete bases (ordinal, nonparametric) have no density: exact continuous
contributions are undefined for them and requesting a derivative raises.

The centered form rewrites ``h(y) = hbar(y) - beta0`` with ``hbar``
constrained to have coefficients summing to zero (continuous case) or a
first step fixed at zero (discrete case).  This moves one degree of freedom
out of the transformation into an explicit intercept ``beta0`` so that
location coefficients of covariates stay identifiable during selection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import special

_KINDS = ("bernstein", "loglinear", "ordinal", "nonparametric")


class BasisError(ValueError):
    """Raised for structurally invalid basis requests."""


@dataclass(frozen=True)
class BasisSpec:
    """Description of a transformation basis.

    Parameters
    ----------
    kind : str
        One of "bernstein", "loglinear", "ordinal", "nonparametric".
    order : int, optional
        Polynomial order for the Bernstein basis (number of parameters is
        order + 1).  Ignored for the other kinds.
    support : tuple of float, optional
        Interval (a, b) on which the Bernstein basis lives.  Required for
        "bernstein".  For "loglinear" the support is (0, inf) implicitly.
    n_levels : int, optional
        Number of ordered categories K for the "ordinal" kind.
    values : tuple of float, optional
        Sorted distinct response values for the "nonparametric" kind.
    count_floor : bool
        Apply floor() to the response before evaluating the basis, the
        convention for count responses observed on a continuous time axis.
    centered : bool
        Use the identified form with an explicit intercept beta0.
    """

    kind: str
    order: int | None = None
    support: tuple[float, float] | None = None
    n_levels: int | None = None
    values: tuple[float, ...] | None = None
    count_floor: bool = False
    centered: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise BasisError(f"unknown basis kind {self.kind!r}")
        if self.kind == "bernstein":
            if self.order is None or int(self.order) < 1:
                raise BasisError("bernstein basis needs order >= 1")
            object.__setattr__(self, "order", int(self.order))
            if self.support is None:
                raise BasisError("bernstein basis needs a support interval")
            a, b = float(self.support[0]), float(self.support[1])
            if not np.isfinite(a) or not np.isfinite(b) or not a < b:
                raise BasisError(f"invalid support ({a}, {b})")
            object.__setattr__(self, "support", (a, b))
        elif self.kind == "loglinear":
            if self.support is not None:
                a, b = float(self.support[0]), float(self.support[1])
                if a < 0:
                    raise BasisError("loglinear basis needs positive support")
                object.__setattr__(self, "support", (a, b))
        elif self.kind == "ordinal":
            if self.n_levels is None or int(self.n_levels) < 2:
                raise BasisError("ordinal basis needs n_levels >= 2")
            object.__setattr__(self, "n_levels", int(self.n_levels))
        elif self.kind == "nonparametric":
            if self.values is None or len(self.values) < 2:
                raise BasisError("nonparametric basis needs >= 2 distinct values")
            vals = tuple(float(v) for v in self.values)
            if any(v2 <= v1 for v1, v2 in zip(vals, vals[1:])):
                raise BasisError("nonparametric values must be strictly increasing")
            object.__setattr__(self, "values", vals)
        if self.centered and self.kind == "loglinear":
            raise BasisError("centered form is not defined for the loglinear basis")

    @property
    def is_discrete(self) -> bool:
        return self.kind in ("ordinal", "nonparametric")

    @property
    def n_params(self) -> int:
        """Dimension of the raw coefficient vector theta."""
        if self.kind == "bernstein":
            return self.order + 1
        if self.kind == "loglinear":
            return 2
        if self.kind == "ordinal":
            return self.n_levels - 1
        return len(self.values) - 1

    @property
    def n_free(self) -> int:
        """Dimension of the free coefficient vector (after centering)."""
        return self.n_params - 1 if self.centered else self.n_params

    def finite_range(self) -> tuple[float, float]:
        """Interval [lo, hi] of responses where h is finite.

        Interval endpoints below lo map to h = -inf, endpoints above hi to
        h = +inf; this encodes zero probability mass outside the declared
        support of the response.
        """
        if self.kind == "bernstein":
            return self.support
        if self.kind == "loglinear":
            return (0.0, np.inf)
        if self.kind == "ordinal":
            return (1.0, float(self.n_levels) - 1.0)
        return (self.values[0], self.values[-1])

    def uncentered(self) -> "BasisSpec":
        return replace(self, centered=False) if self.centered else self

    def as_centered(self) -> "BasisSpec":
        return self if self.centered else replace(self, centered=True)


@dataclass(frozen=True)
class CenteredCoefficients:
    """Pair (theta_bar, beta0) of centered coefficients and intercept."""

    theta_bar: np.ndarray
    beta0: float


def _bernstein_design(u: np.ndarray, order: int) -> np.ndarray:
    """All Bernstein polynomials of the given order at points u in [0, 1]."""
    k = np.arange(order + 1)
    binom = special.comb(order, k)
    u = u[:, None]
    # 0**0 == 1 under np.power, so endpoints come out exact
    return binom * np.power(u, k) * np.power(1.0 - u, order - k)


def _unit_coords(spec: BasisSpec, y: np.ndarray) -> np.ndarray:
    a, b = spec.support
    u = (y - a) / (b - a)
    tol = 1e-12
    if np.any(u < -tol) or np.any(u > 1.0 + tol):
        bad = y[(u < -tol) | (u > 1.0 + tol)]
        raise BasisError(
            f"response value {bad.ravel()[0]!r} outside basis support ({a}, {b})"
        )
    return np.clip(u, 0.0, 1.0)


def _prep(spec: BasisSpec, y) -> tuple[np.ndarray, bool]:
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr)
    if spec.count_floor:
        y_arr = np.floor(y_arr)
    return y_arr, scalar


def _step_index(spec: BasisSpec, y: np.ndarray) -> np.ndarray:
    """Zero-based step index for discrete bases; errors outside the range.

    Steps are left-closed: h(y) = theta_k on [v_k, v_{k+1}), with h = -inf
    below the first value and h = +inf at and beyond the last.
    """
    if spec.kind == "ordinal":
        k = spec.n_levels
        if np.any(y < 1.0) or np.any(y >= k):
            raise BasisError(
                f"ordinal response must lie in [1, {k}); "
                "the boundary transformation is infinite beyond"
            )
        return np.clip(np.floor(y).astype(int) - 1, 0, spec.n_params - 1)
    vals = np.asarray(spec.values)
    if np.any(y < vals[0]) or np.any(y >= vals[-1]):
        raise BasisError(
            "nonparametric response outside the step range; the "
            "transformation is infinite there"
        )
    return np.searchsorted(vals, y, side="right") - 1


def eval_basis(spec: BasisSpec, y) -> np.ndarray:
    """Basis row(s) a(y), shape (n_params,) for scalar y else (n, n_params)."""
    y_arr, scalar = _prep(spec, y)
    if spec.kind == "bernstein":
        rows = _bernstein_design(_unit_coords(spec, y_arr), spec.order)
    elif spec.kind == "loglinear":
        if np.any(y_arr <= 0):
            raise BasisError("loglinear basis needs strictly positive responses")
        rows = np.column_stack([np.ones_like(y_arr), np.log(y_arr)])
    else:
        idx = _step_index(spec, y_arr)
        rows = np.zeros((y_arr.size, spec.n_params))
        rows[np.arange(y_arr.size), idx] = 1.0
    return rows[0] if scalar else rows


def eval_basis_deriv(spec: BasisSpec, y) -> np.ndarray:
    """Row(s) a'(y) of basis derivatives; discrete bases raise."""
    if spec.is_discrete:
        raise BasisError(f"{spec.kind} basis is discrete and has no derivative")
    y_arr, scalar = _prep(spec, y)
    if spec.kind == "loglinear":
        if np.any(y_arr <= 0):
            raise BasisError("loglinear basis needs strictly positive responses")
        rows = np.column_stack([np.zeros_like(y_arr), 1.0 / y_arr])
    else:
        a, b = spec.support
        m = spec.order
        u = _unit_coords(spec, y_arr)
        rows = np.zeros((y_arr.size, m + 1))
        if m >= 1:
            lower = _bernstein_design(u, m - 1)
            rows[:, :-1] -= lower
            rows[:, 1:] += lower
            rows *= m / (b - a)
    return rows[0] if scalar else rows


def center_matrix(spec: BasisSpec) -> np.ndarray:
    """Matrix C with a_bar(y) = a(y) @ C for the centered basis."""
    p = spec.n_params
    if spec.is_discrete:
        # hbar steps are theta_k - theta_1, so drop the first column
        c = np.zeros((p, p - 1))
        c[1:, :] = np.eye(p - 1)
        return c
    # continuous: a_bar_p = a_p - a_P using the partition of unity
    c = np.zeros((p, p - 1))
    c[: p - 1, :] = np.eye(p - 1)
    c[p - 1, :] = -1.0
    return c


def eval_basis_centered(spec: BasisSpec, y) -> np.ndarray:
    """Centered basis row(s) a_bar(y), with n_params - 1 columns."""
    base = spec.uncentered()
    rows = eval_basis(base, y)
    return rows @ center_matrix(spec)


def eval_basis_deriv_centered(spec: BasisSpec, y) -> np.ndarray:
    base = spec.uncentered()
    rows = eval_basis_deriv(base, y)
    return rows @ center_matrix(spec)


def center(spec: BasisSpec, theta) -> CenteredCoefficients:
    """Split raw coefficients into (theta_bar, beta0) with h = hbar - beta0.

    Continuous bases subtract the coefficient mean (exact because the basis
    sums to one); discrete bases subtract the first step height.
    """
    theta = np.asarray(theta, dtype=float)
    p = spec.n_params
    if theta.shape != (p,):
        raise BasisError(f"expected {p} coefficients, got shape {theta.shape}")
    if spec.kind == "loglinear":
        raise BasisError("centered form is not defined for the loglinear basis")
    if spec.is_discrete:
        shift = theta[0]
        theta_bar = theta[1:] - shift
    else:
        shift = float(np.mean(theta))
        theta_bar = theta[:-1] - shift
    return CenteredCoefficients(theta_bar=theta_bar, beta0=-shift)


def uncenter(spec: BasisSpec, coeffs: CenteredCoefficients) -> np.ndarray:
    """Inverse of center(): recover the raw coefficient vector."""
    tb = np.asarray(coeffs.theta_bar, dtype=float)
    p = spec.n_params
    if tb.shape != (p - 1,):
        raise BasisError(f"expected {p - 1} centered coefficients, got {tb.shape}")
    shift = -float(coeffs.beta0)
    if spec.is_discrete:
        return np.concatenate([[shift], tb + shift])
    last = -np.sum(tb)
    return np.concatenate([tb, [last]]) + shift


def monotone_constraints(spec: BasisSpec) -> np.ndarray:
    """Rows D with D @ theta_free >= 0 required for a monotone h.

    The free vector is theta itself, or theta_bar when the spec is
    centered.  The fitter adds its own strictness margin on top.
    """
    p = spec.n_params
    if spec.kind == "loglinear":
        return np.array([[0.0, 1.0]])
    diffs = np.zeros((p - 1, p))
    idx = np.arange(p - 1)
    diffs[idx, idx] = -1.0
    diffs[idx, idx + 1] = 1.0
    if not spec.centered:
        return diffs
    if spec.is_discrete:
        # theta_bar_k = theta_{k+1} - theta_1: increasing and first one >= 0
        rows = np.zeros((p - 1, p - 1))
        rows[0, 0] = 1.0
        for r in range(1, p - 1):
            rows[r, r - 1] = -1.0
            rows[r, r] = 1.0
        return rows
    # continuous: same difference rows expressed in theta_bar coordinates,
    # using theta_bar_P = -sum(theta_bar)
    return diffs @ center_matrix(spec)


def endpoint_rows(spec: BasisSpec, e) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Design rows for interval endpoints, with infinities resolved.

    Endpoints below the finite range of h map to h = -inf, endpoints at or
    beyond its upper end to h = +inf; this encodes zero response mass
    outside the declared support.  For the Bernstein basis the support
    interval itself is closed on both sides.

    Returns
    -------
    rows : ndarray, shape (n, n_free)
        Basis rows (centered if the spec is centered); zero where not finite.
    finite : ndarray of bool, shape (n,)
        True where h(e) is finite.
    positive : ndarray of bool, shape (n,)
        For non-finite entries, True means h = +inf.
    """
    e = np.atleast_1d(np.asarray(e, dtype=float))
    if spec.count_floor:
        e = np.where(np.isfinite(e), np.floor(e), e)
    neg = np.zeros(e.shape, dtype=bool)
    pos = np.zeros(e.shape, dtype=bool)
    if spec.kind == "bernstein":
        a, b = spec.support
        neg = e < a
        pos = e > b
    elif spec.kind == "loglinear":
        neg = e <= 0.0
        pos = np.isposinf(e)
    elif spec.kind == "ordinal":
        neg = e < 1.0
        pos = e >= spec.n_levels
    else:
        neg = e < spec.values[0]
        pos = e >= spec.values[-1]
    finite = ~(neg | pos)
    rows = np.zeros((e.size, spec.n_free))
    if np.any(finite):
        base = replace(spec, count_floor=False)
        rows[finite] = (
            eval_basis_centered(base, e[finite])
            if spec.centered
            else eval_basis(base, e[finite])
        )
    return rows, finite, pos


def transformation_value(spec: BasisSpec, theta_free, y) -> np.ndarray:
    """h at finite response values under the spec's parameterization.

    For centered specs this is hbar(y); the intercept beta0 is applied by
    the model, not here.
    """
    rows = eval_basis_centered(spec, y) if spec.centered else eval_basis(spec, y)
    return rows @ np.asarray(theta_free, dtype=float)


def transformation_deriv(spec: BasisSpec, theta_free, y) -> np.ndarray:
    rows = (
        eval_basis_deriv_centered(spec, y)
        if spec.centered
        else eval_basis_deriv(spec, y)
    )
    return rows @ np.asarray(theta_free, dtype=float)
