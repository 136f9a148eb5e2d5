"""Score-residual tests, curves, and simultaneous inference."""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from locscale.bases import BasisSpec
from locscale.data import DataError, dataset_from_frame, make_dataset, encode_response
from locscale.fitter import FitOptions, fit, fit_unconditional
from locscale.inference import (
    CurveRequest,
    equicoordinate_quantile,
    grouping_matrix,
    predict_curve,
    probabilistic_index,
    roc_curve,
    score_test,
    simultaneous_ci,
    _perm_moments,
)
from locscale.likelihood import ModelSpec, score_residuals

from helpers import gaussian_dataset, simple_spec


class TestPermutationMoments:
    def test_match_exhaustive_enumeration(self):
        rng = np.random.default_rng(42)
        g = rng.normal(size=(6, 2))
        r = rng.normal(size=(6, 2))
        mean, cov = _perm_moments(g, r)
        stats_all = []
        for perm in itertools.permutations(range(6)):
            stats_all.append((g.T @ r[list(perm)]).ravel())
        stats_all = np.asarray(stats_all)
        assert_allclose(mean, stats_all.mean(axis=0), rtol=1e-10, atol=1e-12)
        emp_cov = np.cov(stats_all.T, bias=True)
        assert_allclose(cov, emp_cov, rtol=1e-8, atol=1e-10)

    def test_constant_column_degenerates(self):
        rng = np.random.default_rng(0)
        g = np.ones((8, 1))
        r = rng.normal(size=(8, 2))
        _, cov = _perm_moments(g, r)
        assert np.max(np.abs(cov)) < 1e-10


@pytest.fixture(scope="module")
def curve_fit():
    ds, basis = gaussian_dataset(n=200, beta=0.8, seed=0)
    spec = ModelSpec(basis=basis, link="probit", location=("x1",), scale=("x1",))
    return fit(ds, spec, FitOptions(compute_vcov=False))


class TestPredictCurve:
    def test_distribution_monotone_in_unit_interval(self, curve_fit):
        lo, hi = curve_fit.spec.basis.support
        grid = np.linspace(lo, hi, 41)
        vals = predict_curve(
            curve_fit, CurveRequest(target="distribution", grid=grid, x={"x1": 0.4})
        )
        assert np.all(np.diff(vals) >= -1e-12)
        assert vals.min() >= 0.0 and vals.max() <= 1.0

    def test_survivor_complements_distribution(self, curve_fit):
        lo, hi = curve_fit.spec.basis.support
        grid = np.linspace(lo, hi, 21)
        req = dict(grid=grid, x={"x1": -0.2})
        f = predict_curve(curve_fit, CurveRequest(target="distribution", **req))
        s = predict_curve(curve_fit, CurveRequest(target="survivor", **req))
        assert_allclose(f + s, np.ones_like(grid), atol=1e-12)

    def test_hazard_and_odds_identities(self, curve_fit):
        lo, hi = curve_fit.spec.basis.support
        grid = np.linspace(lo + 0.3, hi - 0.3, 11)
        req = dict(grid=grid, x={"x1": 0.1})
        f = predict_curve(curve_fit, CurveRequest(target="distribution", **req))
        d = predict_curve(curve_fit, CurveRequest(target="density", **req))
        h = predict_curve(curve_fit, CurveRequest(target="hazard", **req))
        o = predict_curve(curve_fit, CurveRequest(target="odds", **req))
        assert np.all(d >= 0)
        assert_allclose(h, d / (1.0 - f), rtol=1e-10)
        assert_allclose(o, f / (1.0 - f), rtol=1e-10)

    def test_quantile_roundtrip(self, curve_fit):
        probs = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
        q = predict_curve(
            curve_fit, CurveRequest(target="quantile", probs=probs, x={"x1": 0.4})
        )
        assert np.all(np.diff(q) > 0)
        back = predict_curve(
            curve_fit, CurveRequest(target="distribution", grid=q, x={"x1": 0.4})
        )
        assert_allclose(back, probs, atol=1e-6)

    def test_unknown_target_rejected(self, curve_fit):
        with pytest.raises(ValueError):
            CurveRequest(target="cdf")


@pytest.fixture(scope="module")
def fitted():
    ds, basis = gaussian_dataset(n=250, beta=1.2, seed=1)
    return fit(ds, ModelSpec(basis=basis, link="probit", location=("x1",)))


class TestProbabilisticIndex:

    def test_same_row_is_half(self, fitted):
        pi = probabilistic_index(fitted, {"x1": 0.3}, {"x1": 0.3})
        assert_allclose(pi.estimate, 0.5, atol=1e-12)

    def test_probit_closed_form(self, fitted):
        pi = probabilistic_index(fitted, {"x1": 0.0}, {"x1": 1.0})
        beta = fitted.coef("beta:x1")
        expected = stats.norm.cdf(beta / np.sqrt(2.0))
        assert_allclose(pi.estimate, expected, rtol=1e-10)
        assert pi.lower is not None
        assert pi.lower < pi.estimate < pi.upper
        assert pi.se > 0

    def test_quadrature_matches_closed_form_shape(self):
        ds, basis = gaussian_dataset(n=250, beta=1.2, seed=1)
        res = fit(
            ds,
            ModelSpec(basis=basis, link="logit", location=("x1",)),
            FitOptions(compute_vcov=False),
        )
        pi = probabilistic_index(res, {"x1": 0.3}, {"x1": 0.3})
        assert_allclose(pi.estimate, 0.5, atol=1e-8)
        shifted = probabilistic_index(res, {"x1": 0.0}, {"x1": 1.0})
        assert shifted.estimate > 0.55

    def test_roc_is_identity_for_equal_rows(self, fitted):
        t = np.linspace(0.0, 1.0, 11)
        roc = roc_curve(fitted, {"x1": 0.5}, {"x1": 0.5}, t)
        assert_allclose(roc, t, atol=1e-10)

    def test_roc_above_diagonal_for_shifted_cases(self, fitted):
        t = np.linspace(0.05, 0.95, 10)
        roc = roc_curve(fitted, {"x1": 0.0}, {"x1": 1.0}, t)
        assert np.all(roc > t)


class TestEquicoordinate:
    def test_independent_case_matches_sidak(self):
        level = 0.95
        for k in (1, 3):
            corr = np.eye(k)
            c = equicoordinate_quantile(corr, level, seed=0)
            sidak = stats.norm.ppf(0.5 + level ** (1.0 / k) / 2.0)
            assert abs(c - sidak) < 0.01

    def test_simultaneous_ci_wider_than_marginal(self):
        ds, basis = gaussian_dataset(n=200, beta=0.8, seed=2)
        spec = ModelSpec(
            basis=basis, link="probit", location=("x1",), scale=("x1",)
        )
        res = fit(ds, spec)
        ci = simultaneous_ci(res, seed=0)
        z = stats.norm.ppf(0.975)
        assert ci.critical >= z - 1e-6
        assert ci.labels == ["beta:x1", "gamma:x1"]
        assert np.all(ci.lower < ci.estimate)
        assert np.all(ci.estimate < ci.upper)
        assert_allclose(ci.upper - ci.estimate, ci.critical * ci.se, rtol=1e-12)

    def test_contrast_rows_relabelled(self):
        ds, basis = gaussian_dataset(n=150, beta=0.5, seed=3)
        spec = ModelSpec(
            basis=basis, link="probit", location=("x1",), scale=("x1",)
        )
        res = fit(ds, spec)
        contrast = np.array([[1.0, -1.0], [1.0, 1.0]])
        ci = simultaneous_ci(res, contrast=contrast, seed=0)
        assert ci.labels == ["c1", "c2"]
        est = np.array([res.coef("beta:x1"), res.coef("gamma:x1")])
        assert_allclose(ci.estimate, contrast @ est, rtol=1e-12)


class TestGroupingMatrix:
    def test_numeric_column_passthrough(self):
        ds, _ = gaussian_dataset(n=30, seed=4)
        g, labels = grouping_matrix(ds, "x1")
        assert labels == ["x1"]
        assert_allclose(g[:, 0], ds.column("x1"))

    def test_factor_one_hot(self):
        import pandas as pd

        frame = pd.DataFrame(
            {"y": np.random.default_rng(42).normal(size=9), "f": list("abcabcabc")}
        )
        ds = dataset_from_frame(frame, response="y")
        g, labels = grouping_matrix(ds, "f")
        assert labels == ["f=a", "f=b", "f=c"]
        assert_allclose(g.sum(axis=1), np.ones(9))
        assert_allclose(g.sum(axis=0), [3, 3, 3])

    def test_ordered_factor_single_column(self):
        import pandas as pd

        frame = pd.DataFrame(
            {
                "y": np.random.default_rng(42).normal(size=6),
                "f": pd.Categorical(
                    ["lo", "hi", "mid", "lo", "hi", "mid"],
                    categories=["lo", "mid", "hi"],
                    ordered=True,
                ),
            }
        )
        ds = dataset_from_frame(frame, response="y")
        g, labels = grouping_matrix(ds, "f")
        assert labels == ["f"]
        assert_allclose(g[:, 0], [0, 2, 1, 0, 2, 1])


@pytest.fixture(scope="module")
def setup():
    ds, basis = gaussian_dataset(n=200, beta=1.5, seed=5)
    spec = ModelSpec(basis=basis, link="probit")
    return ds, spec


class TestScoreTest:

    def test_labels_and_shapes(self, setup):
        ds, spec = setup
        out = score_test(ds, spec, "x1", B=199, seed=0)
        assert out.labels == ["x1:location", "x1:scale"]
        assert out.statistic.shape == (1, 2)
        assert out.covariance.shape == (2, 2)
        assert out.n_perm == 199
        assert 0.0 <= out.p_max_perm <= 1.0
        assert 0.0 <= out.p_quad_perm <= 1.0

    def test_detects_location_signal(self, setup):
        ds, spec = setup
        out = score_test(ds, spec, "x1", B=499, seed=0)
        assert out.p_quad_perm < 0.05
        assert out.p_max_perm < 0.05
        assert out.p_quad < 0.05

    def test_deterministic_given_seed(self, setup):
        ds, spec = setup
        a = score_test(ds, spec, "x1", B=299, seed=7)
        b = score_test(ds, spec, "x1", B=299, seed=7)
        assert a.p_max_perm == b.p_max_perm
        assert a.p_quad_perm == b.p_quad_perm

    def test_array_and_list_groups(self, setup):
        ds, spec = setup
        arr = ds.column("x1")[:, None]
        out = score_test(ds, spec, arr, B=99, seed=0)
        assert out.labels == ["g1:location", "g1:scale"]
        out2 = score_test(ds, spec, ["x1"], B=99, seed=0)
        assert out2.labels == ["x1:location", "x1:scale"]
        assert_allclose(out.statistic, out2.statistic)

    def test_exhaustive_small_sample(self):
        rng = np.random.default_rng(42)
        y = rng.normal(size=6)
        x = rng.normal(size=(6, 1))
        basis = BasisSpec(
            kind="bernstein", order=2, support=(y.min() - 1, y.max() + 1)
        )
        ds = make_dataset(y, x, ("x1",))
        spec = ModelSpec(basis=basis, link="probit")
        out = score_test(ds, spec, "x1", exhaustive=True)
        assert out.exhaustive
        assert out.n_perm == 720
        again = score_test(ds, spec, "x1", exhaustive=True, seed=99)
        assert out.p_max_perm == again.p_max_perm

    def test_exhaustive_rejects_large_n(self, setup):
        ds, spec = setup
        with pytest.raises(ValueError):
            score_test(ds, spec, "x1", exhaustive=True)

    def test_missing_covariate_errors(self, setup):
        ds, spec = setup
        with pytest.raises(DataError):
            score_test(ds, spec, "x9", B=19)


@pytest.fixture(scope="module")
def survival():
    rng = np.random.default_rng(42)
    t = rng.exponential(scale=2.0, size=120)
    c = rng.exponential(scale=4.0, size=120)
    obs = np.minimum(t, c)
    event = t <= c
    tau = np.unique(obs[event])
    prev = {tau[k]: (tau[k - 1] if k else -np.inf) for k in range(tau.size)}
    data = [
        encode_response("interval", (prev[o], o))
        if e
        else encode_response("right", o)
        for o, e in zip(obs, event)
    ]
    ds = make_dataset(data)
    basis = BasisSpec(kind="nonparametric", values=tau)
    spec = ModelSpec(basis=basis, link="cloglog")
    res = fit_unconditional(ds, spec, FitOptions(compute_vcov=False))
    assert res.converged
    rloc = score_residuals(ds, spec, res.params).location
    return obs, event, tau, rloc


class TestSurvivalResiduals:
    """Score residuals reproduce classical survival statistics.

    With a minimum-information transformation (one step per event time)
    and the cloglog link, the location residual at the fitted null model
    is the negative martingale residual, so residual group sums recover
    the log-rank numerator.
    """

    def test_tracks_nelson_aalen_martingale(self, survival):
        obs, event, tau, rloc = survival
        d = np.array([np.sum(obs[event] == tj) for tj in tau])
        R = np.array([np.sum(obs >= tj) for tj in tau])
        cumhaz = np.cumsum(d / R)
        lam_at = np.array(
            [
                cumhaz[np.searchsorted(tau, o, side="right") - 1]
                if o >= tau[0]
                else 0.0
                for o in obs
            ]
        )
        m = event.astype(float) - lam_at
        assert np.corrcoef(rloc, m)[0, 1] < -0.999
        risk_at = np.array([np.sum(obs >= o) for o in obs])
        well_supported = risk_at >= 20
        assert np.max(np.abs(-rloc - m)[well_supported]) < 0.02

    def test_group_sum_matches_logrank_numerator(self, survival):
        obs, event, tau, rloc = survival
        d = np.array([np.sum(obs[event] == tj) for tj in tau])
        R = np.array([np.sum(obs >= tj) for tj in tau])
        grp = np.zeros(obs.size, dtype=bool)
        grp[:60] = True
        observed = np.sum(event[grp])
        expected = np.sum(
            d * np.array([np.sum(obs[grp] >= tj) for tj in tau]) / R
        )
        o_minus_e = observed - expected
        assert abs(-np.sum(rloc[grp]) - o_minus_e) / abs(o_minus_e) < 0.025
