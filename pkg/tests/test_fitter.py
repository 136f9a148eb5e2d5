"""Constrained maximum likelihood fitting."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from locscale.bases import BasisSpec
from locscale.data import make_dataset
from locscale.fitter import (
    FitOptions,
    fit,
    fit_unconditional,
    lr_test,
    wald_test,
)
from locscale.likelihood import ModelSpec, loglik

from helpers import gaussian_dataset, log_chi2_dataset, simple_spec


class TestFitBasics:
    def test_converges_with_small_gradient(self):
        ds, basis = gaussian_dataset(n=150, beta=0.8, seed=0)
        res = fit(ds, simple_spec(basis))
        assert res.converged
        assert res.grad_norm < 1e-4
        assert res.n_obs == 150
        assert res.df == basis.n_params + 1

    def test_theta_strictly_increasing(self):
        ds, basis = gaussian_dataset(n=100, seed=2)
        res = fit(ds, simple_spec(basis))
        assert np.all(np.diff(np.ravel(res.params.theta)) > 0)

    def test_vcov_symmetric_psd(self):
        ds, basis = gaussian_dataset(n=150, beta=0.5, seed=4)
        res = fit(ds, simple_spec(basis))
        assert res.vcov is not None
        assert_allclose(res.vcov, res.vcov.T, atol=1e-10)
        eigvals = np.linalg.eigvalsh(res.vcov)
        assert eigvals.min() > -1e-8

    def test_coef_and_stderr_lookup(self):
        ds, basis = gaussian_dataset(n=120, beta=0.6, seed=5)
        res = fit(ds, simple_spec(basis))
        assert "beta:x1" in res.param_names
        assert np.isfinite(res.coef("beta:x1"))
        assert res.stderr("beta:x1") > 0
        with pytest.raises(KeyError):
            res.coef("beta:x9")

    def test_no_vcov_when_disabled(self):
        ds, basis = gaussian_dataset(n=80, seed=6)
        res = fit(ds, simple_spec(basis), FitOptions(compute_vcov=False))
        assert res.vcov is None
        with pytest.raises(ValueError):
            res.stderr("beta:x1")

    def test_optimizers_agree(self):
        ds, basis = gaussian_dataset(n=120, beta=0.7, seed=8)
        spec = ModelSpec(
            basis=basis, link="probit", location=("x1",), scale=("x1",)
        )
        a = fit(ds, spec, FitOptions(optimizer="auglag", compute_vcov=False))
        b = fit(ds, spec, FitOptions(optimizer="reparam", compute_vcov=False))
        assert_allclose(a.loglik, b.loglik, atol=1e-4)
        assert_allclose(a.coef("beta:x1"), b.coef("beta:x1"), atol=1e-3)

    def test_start_values_honoured(self):
        ds, basis = gaussian_dataset(n=100, beta=0.5, seed=9)
        spec = simple_spec(basis)
        first = fit(ds, spec, FitOptions(compute_vcov=False))
        warm = fit(
            ds, spec, FitOptions(start=first.params, compute_vcov=False)
        )
        assert warm.converged
        assert warm.n_iter <= first.n_iter
        assert_allclose(warm.loglik, first.loglik, atol=1e-6)

    def test_unknown_optimizer_rejected(self):
        ds, basis = gaussian_dataset(n=50, seed=10)
        with pytest.raises(ValueError):
            fit(ds, simple_spec(basis), FitOptions(optimizer="newton"))


class TestWeightsAndCensoring:
    def test_weights_match_duplication(self):
        rng = np.random.default_rng(42)
        y = rng.normal(size=60)
        x = rng.uniform(-1, 1, size=(60, 1))
        lo, hi = y.min() - 0.5, y.max() + 0.5
        basis = BasisSpec(kind="bernstein", order=4, support=(lo, hi))
        spec = simple_spec(basis)
        w = np.ones(60)
        w[:10] = 2.0
        weighted = make_dataset(y, x, ("x1",), weights=w)
        dup = make_dataset(
            np.concatenate([y[:10], y]), np.vstack([x[:10], x]), ("x1",)
        )
        rw = fit(weighted, spec, FitOptions(compute_vcov=False))
        rd = fit(dup, spec, FitOptions(compute_vcov=False))
        assert_allclose(rw.loglik, rd.loglik, atol=1e-5)
        assert_allclose(rw.coef("beta:x1"), rd.coef("beta:x1"), atol=1e-4)

    def test_right_censoring_shifts_fit(self):
        from locscale.data import encode_response

        rng = np.random.default_rng(42)
        t = rng.exponential(scale=2.0, size=200)
        obs = np.minimum(t, 3.0)
        data = [
            encode_response("exact" if ti <= 3.0 else "right", oi)
            for ti, oi in zip(t, obs)
        ]
        basis = BasisSpec(kind="bernstein", order=5, support=(0.0, 3.2))
        spec = ModelSpec(basis=basis, link="cloglog")
        ds = make_dataset(data)
        res = fit(ds, spec, FitOptions(compute_vcov=False))
        assert res.converged
        naive = make_dataset(obs, kind="exact")
        res_naive = fit(naive, spec, FitOptions(compute_vcov=False))
        from locscale.inference import predict_curve, CurveRequest

        req = CurveRequest(target="survivor", grid=np.array([2.5]))
        s_cens = predict_curve(res, req)[0]
        s_naive = predict_curve(res_naive, req)[0]
        true_s = np.exp(-2.5 / 2.0)
        assert abs(s_cens - true_s) < abs(s_naive - true_s)

    def test_stratified_fit_matches_separate(self):
        rng = np.random.default_rng(42)
        y1 = rng.normal(0.0, 1.0, size=80)
        y2 = rng.normal(1.0, 1.5, size=80)
        y = np.concatenate([y1, y2])
        stratum = ["a"] * 80 + ["b"] * 80
        lo, hi = y.min() - 0.5, y.max() + 0.5
        basis = BasisSpec(kind="bernstein", order=4, support=(lo, hi))
        spec = ModelSpec(basis=basis, link="probit", stratified=True)
        ds = make_dataset(y, stratum=stratum)
        res = fit(ds, spec, FitOptions(compute_vcov=False))
        sep_spec = ModelSpec(basis=basis, link="probit")
        ll_sep = 0.0
        for block in (y1, y2):
            r = fit(make_dataset(block), sep_spec, FitOptions(compute_vcov=False))
            ll_sep += r.loglik
        assert_allclose(res.loglik, ll_sep, atol=1e-3)


class TestRecovery:
    def test_location_scale_estimates_near_truth(self):
        ds, basis = log_chi2_dataset(800, beta=1.0, gamma=1.0, seed=1)
        spec = ModelSpec(
            basis=basis, link="logit", location=("x1", "x2"), scale=("x1", "x2")
        )
        res = fit(ds, spec, FitOptions(compute_vcov=False))
        assert res.converged
        assert abs(res.coef("beta:x1") - 1.0) < 0.4
        assert abs(res.coef("gamma:x2") - 1.0) < 0.4
        assert abs(res.coef("beta:x2")) < 0.4
        assert abs(res.coef("gamma:x1")) < 0.4

    def test_gaussian_distribution_recovered(self):
        rng = np.random.default_rng(42)
        y = rng.normal(size=400)
        basis = BasisSpec(kind="bernstein", order=6, support=(-4.0, 4.0))
        ds = make_dataset(y)
        res = fit_unconditional(ds, ModelSpec(basis=basis, link="probit"))
        from locscale.inference import predict_curve, CurveRequest

        grid = np.linspace(-1.5, 1.5, 7)
        est = predict_curve(res, CurveRequest(target="distribution", grid=grid))
        assert np.max(np.abs(est - stats.norm.cdf(grid))) < 0.06


class TestModelComparison:
    def test_lr_statistic_and_df(self):
        ds, basis = gaussian_dataset(n=200, beta=0.9, seed=12)
        full = fit(ds, simple_spec(basis), FitOptions(compute_vcov=False))
        null = fit(
            ds, ModelSpec(basis=basis, link="probit"), FitOptions(compute_vcov=False)
        )
        out = lr_test(full, null)
        assert out.df == 1
        assert_allclose(out.statistic, 2.0 * (full.loglik - null.loglik), rtol=1e-12)
        assert_allclose(out.p_value, stats.chi2.sf(out.statistic, 1), rtol=1e-12)
        assert out.p_value < 0.05

    def test_lr_rejects_non_nested(self):
        ds, basis = gaussian_dataset(n=100, seed=13)
        a = fit(ds, simple_spec(basis), FitOptions(compute_vcov=False))
        b = fit(
            ds,
            ModelSpec(basis=basis, link="probit", scale=("x1",)),
            FitOptions(compute_vcov=False),
        )
        with pytest.raises(ValueError):
            lr_test(a, b)

    def test_wald_agrees_with_lr_in_direction(self):
        ds, basis = gaussian_dataset(n=200, beta=0.9, seed=12)
        full = fit(ds, simple_spec(basis))
        w = wald_test(full, ["beta:x1"])
        assert w.df == 1
        assert w.p_value < 0.05

    def test_fit_result_loglik_consistent(self):
        ds, basis = gaussian_dataset(n=90, beta=0.4, seed=14)
        spec = simple_spec(basis)
        res = fit(ds, spec, FitOptions(compute_vcov=False))
        assert_allclose(loglik(ds, spec, res.params), res.loglik, rtol=1e-10)
