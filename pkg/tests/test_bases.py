"""Transformation bases: design matrices, constraints, centering."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from locscale.bases import (
    BasisError,
    BasisSpec,
    center,
    eval_basis,
    eval_basis_centered,
    eval_basis_deriv,
    monotone_constraints,
    transformation_deriv,
    transformation_value,
    uncenter,
)


def bernstein(order=5, support=(0.0, 10.0), **kw):
    return BasisSpec(kind="bernstein", order=order, support=support, **kw)


class TestBernstein:
    def test_partition_of_unity(self):
        spec = bernstein()
        y = np.linspace(0.0, 10.0, 33)
        a = eval_basis(spec, y)
        assert a.shape == (33, spec.n_params)
        assert_allclose(a.sum(axis=1), 1.0, atol=1e-12)

    def test_monotone_in_theta(self):
        spec = bernstein()
        theta = np.array([-2.0, -1.0, -0.2, 0.3, 1.1, 2.5])
        y = np.linspace(0.0, 10.0, 200)
        h = transformation_value(spec, theta, y)
        assert np.all(np.diff(h) > 0)

    def test_endpoints_hit_first_and_last_coefficient(self):
        spec = bernstein()
        theta = np.array([-2.0, -1.0, -0.2, 0.3, 1.1, 2.5])
        h = transformation_value(spec, theta, np.array([0.0, 10.0]))
        assert_allclose(h, [theta[0], theta[-1]], atol=1e-12)

    def test_deriv_matches_finite_differences(self):
        spec = bernstein()
        y = np.linspace(0.5, 9.5, 19)
        h = 1e-6
        fd = (eval_basis(spec, y + h) - eval_basis(spec, y - h)) / (2.0 * h)
        assert_allclose(eval_basis_deriv(spec, y), fd, rtol=1e-6, atol=1e-7)

    def test_deriv_nonnegative_under_monotone_theta(self):
        spec = bernstein()
        theta = np.linspace(-1.0, 1.0, spec.n_params)
        y = np.linspace(0.0, 10.0, 50)
        assert np.all(transformation_deriv(spec, theta, y) >= 0)

    def test_outside_support_rejected(self):
        spec = bernstein()
        with pytest.raises(BasisError):
            eval_basis(spec, np.array([-0.5]))


class TestDiscreteBases:
    def test_ordinal_parameter_count(self):
        spec = BasisSpec(kind="ordinal", n_levels=5)
        assert spec.n_params == 4
        assert spec.is_discrete

    def test_ordinal_rows_are_cumulative_indicators(self):
        spec = BasisSpec(kind="ordinal", n_levels=4)
        a = eval_basis(spec, np.array([1.0, 2.0, 3.0]))
        expected = np.array([
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        assert_allclose(a, expected)

    def test_ordinal_has_no_derivative(self):
        spec = BasisSpec(kind="ordinal", n_levels=4)
        with pytest.raises(BasisError):
            eval_basis_deriv(spec, np.array([1.0]))

    def test_nonparametric_left_closed_steps(self):
        spec = BasisSpec(kind="nonparametric", values=(1.0, 2.5, 4.0, 7.0))
        assert spec.n_params == 3
        at_knot = eval_basis(spec, np.array([2.5]))
        between = eval_basis(spec, np.array([3.2]))
        assert_allclose(at_knot, between)

    def test_nonparametric_needs_sorted_values(self):
        with pytest.raises(BasisError):
            BasisSpec(kind="nonparametric", values=(2.0, 1.0, 3.0))


class TestCentering:
    def test_roundtrip(self):
        spec = bernstein()
        theta = np.array([-2.0, -1.0, -0.2, 0.3, 1.1, 2.5])
        cc = center(spec, theta)
        back = uncenter(spec, cc)
        assert_allclose(back, theta, atol=1e-10)

    def test_centered_transformation_shifts_by_intercept(self):
        spec = bernstein()
        theta = np.array([-2.0, -1.0, -0.2, 0.3, 1.1, 2.5])
        cc = center(spec, theta)
        y = np.linspace(0.0, 10.0, 20)
        h = eval_basis(spec, y) @ theta
        h_bar = eval_basis_centered(spec, y) @ cc.theta_bar
        assert_allclose(h_bar - cc.beta0, h, atol=1e-10)

    def test_as_centered_flags(self):
        spec = bernstein()
        cen = spec.as_centered()
        assert cen.centered and not spec.centered
        assert cen.n_free == spec.n_params - 1
        assert cen.uncentered().centered is False


class TestConstraintsAndValidation:
    def test_monotone_constraint_shape(self):
        spec = bernstein()
        cons = monotone_constraints(spec)
        assert cons.shape == (spec.n_params - 1, spec.n_params)
        theta = np.linspace(-1.0, 1.0, spec.n_params)
        assert np.all(cons @ theta > 0)

    def test_bad_kind(self):
        with pytest.raises(BasisError):
            BasisSpec(kind="fourier")

    def test_reversed_support(self):
        with pytest.raises(BasisError):
            bernstein(support=(3.0, 1.0))

    def test_ordinal_needs_levels(self):
        with pytest.raises(BasisError):
            BasisSpec(kind="ordinal")

    def test_loglinear_two_params(self):
        spec = BasisSpec(kind="loglinear")
        assert spec.n_params == 2
        y = np.array([0.5, 1.0, 2.0])
        a = eval_basis(spec, y)
        assert_allclose(a[:, 1], np.log(y))

    def test_count_basis_floors_interval_endpoints(self):
        spec = BasisSpec(
            kind="nonparametric", values=tuple(float(v) for v in range(8)),
            count_floor=True,
        )
        assert spec.is_discrete
