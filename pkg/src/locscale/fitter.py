"""Constrained maximum-likelihood fitting.

Monotonicity of the transformation is a set of linear inequalities on the
coefficients.  Two interchangeable solvers are provided:

* ``auglag`` (default): an augmented-Lagrangian outer loop around an
  unconstrained quasi-Newton solve.  Multiplier estimates are updated
  between outer iterations; with inactive constraints (the usual case for
  continuous data) the very first outer solve already ends at the optimum.
* ``reparam``: optimize over the first coefficient and log-increments, so
  every iterate is feasible by construction.

Both report the same convergence information: the max-norm of the
stationarity residual and the set of active constraints.  Standard errors
come from the observed information, obtained by differencing the analytic
score; when constraints are active the covariance is restricted to the
feasible subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize, stats

from . import bases
from .data import DataError, Dataset
from .likelihood import (
    LikelihoodCore,
    ModelParams,
    ModelSpec,
    ParamLayout,
    layout_for,
)
from .links import get_link


@dataclass
class FitOptions:
    """Optimizer controls.

    ``grad_tol`` is the max-norm stationarity tolerance, ``constraint_margin``
    the strictness margin added to each monotonicity inequality.
    """

    optimizer: str = "auglag"
    grad_tol: float = 1e-6
    constraint_margin: float = 1e-8
    max_iter: int = 500
    max_outer: int = 25
    start: ModelParams | None = None
    compute_vcov: bool = True

    def __post_init__(self):
        if self.optimizer not in ("auglag", "reparam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class FitResult:
    """A fitted model: coefficients, likelihood, and curvature."""

    spec: ModelSpec
    params: ModelParams
    loglik: float
    converged: bool
    n_iter: int
    grad_norm: float
    layout: ParamLayout
    param_names: list[str]
    vcov: np.ndarray | None = None
    active_constraints: list[int] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    n_obs: int = 0

    @property
    def df(self) -> int:
        """Number of free parameters."""
        return self.layout.n_total

    def coef(self, name: str) -> float:
        flat = self.layout.pack(self.params)
        try:
            return float(flat[self.param_names.index(name)])
        except ValueError:
            raise KeyError(f"no parameter named {name!r}") from None

    def stderr(self, name: str) -> float:
        if self.vcov is None:
            raise ValueError("no covariance available for this fit")
        j = self.param_names.index(name)
        return float(np.sqrt(self.vcov[j, j]))


def _pava(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the nondecreasing cone (pool adjacent violators)."""
    v = np.asarray(v, dtype=float)
    level = v.copy()
    weight = np.ones_like(v)
    blocks = []
    for val, w in zip(level, weight):
        blocks.append([val, w])
        while len(blocks) > 1 and blocks[-2][0] >= blocks[-1][0]:
            v2, w2 = blocks.pop()
            v1, w1 = blocks.pop()
            blocks.append([(v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2])
        # merged blocks keep the running means nondecreasing
    out = np.empty_like(v)
    pos = 0
    for val, w in blocks:
        cnt = int(round(w))
        out[pos : pos + cnt] = val
        pos += cnt
    return out


def _strictify(theta: np.ndarray, gap: float) -> np.ndarray:
    """Force strictly increasing coefficients with at least the given gap."""
    out = theta.copy()
    for p in range(1, out.size):
        if out[p] < out[p - 1] + gap:
            out[p] = out[p - 1] + gap
    return out


def constraint_matrix(spec: ModelSpec, layout: ParamLayout) -> np.ndarray:
    """Monotonicity rows on the flat parameter vector (zeros off-theta)."""
    d_block = bases.monotone_constraints(spec.basis)
    m = d_block.shape[0]
    rows = np.zeros((m * layout.n_blocks, layout.n_total))
    for b in range(layout.n_blocks):
        r0, c0 = b * m, b * layout.n_free
        rows[r0 : r0 + m, c0 : c0 + layout.n_free] = d_block
    return rows


def start_values(dataset: Dataset, spec: ModelSpec, margin: float = 1e-8) -> ModelParams:
    """Feasible starting coefficients.

    The transformation start comes from regressing link quantiles of
    rescaled empirical ranks (at interval midpoints) on the basis, followed
    by projection onto the monotone cone.  Covariate coefficients start at
    zero.
    """
    link = get_link(spec.link)
    basis = spec.basis.uncentered()
    layout = layout_for(spec, dataset)
    mids = np.array([r.midpoint() for r in dataset.responses])
    lo, hi = basis.finite_range()
    finite = mids[np.isfinite(mids)]
    if finite.size == 0:
        raise DataError("no finite response endpoints to build starting values")
    if not np.isfinite(lo):
        lo = float(finite.min()) if basis.kind != "loglinear" else max(
            float(finite.min()), 1e-8
        )
    if not np.isfinite(hi):
        hi = float(finite.max())
    mids = np.clip(mids, lo, hi)

    strat = (
        dataset.stratum
        if spec.stratified and dataset.stratum is not None
        else np.zeros(dataset.n, dtype=int)
    )
    p_raw = basis.n_params
    theta = np.empty((layout.n_blocks, p_raw))
    gap = max(1e-4, 10.0 * margin)
    if basis.kind == "bernstein":
        nodes = np.linspace(*basis.support, p_raw)
    elif basis.kind == "ordinal":
        nodes = np.arange(1, basis.n_levels, dtype=float)
    elif basis.kind == "nonparametric":
        nodes = np.asarray(basis.values[:-1], dtype=float)
    else:
        nodes = None
    for b in range(layout.n_blocks):
        sel = strat == b
        m_b = np.sort(mids[sel])
        n_b = m_b.size
        if n_b == 0:
            theta[b] = np.linspace(-1.0, 1.0, p_raw)
            continue
        if basis.kind == "loglinear":
            ranks = stats.rankdata(m_b, method="average")
            v = link.quantile(ranks / (n_b + 1.0))
            a = bases.eval_basis(basis, m_b)
            coef, *_ = np.linalg.lstsq(a, v, rcond=None)
            coef[1] = max(coef[1], gap)
        else:
            # transformation start: link quantiles of the empirical cdf at
            # the basis nodes, which is monotone whatever the data shape
            cum = np.searchsorted(m_b, nodes, side="right")
            probs = np.clip(cum, 1.0, float(n_b)) / (n_b + 1.0)
            coef = _strictify(link.quantile(probs), gap)
        theta[b] = coef

    beta = np.zeros(layout.n_loc)
    gamma = np.zeros(layout.n_sc)
    if spec.centered:
        cc = bases.center(spec.basis, theta[0])
        return ModelParams(
            theta=cc.theta_bar[None, :], beta=beta, gamma=gamma, beta0=cc.beta0
        )
    return ModelParams(theta=theta, beta=beta, gamma=gamma)


def _objective(core: LikelihoodCore):
    def fun(x):
        f, g, _ = core.evaluate(x)
        if not np.isfinite(f):
            return 1e30, np.zeros_like(x)
        return -f, -np.nan_to_num(g)

    return fun


def _solve_auglag(fun, x0, cons, margin, opts: FitOptions):
    """Augmented-Lagrangian loop; returns (x, n_iter, converged, stat_norm, lam)."""
    m = cons.shape[0]
    lam = np.zeros(m)
    rho = 10.0
    x = x0.copy()
    total_iter = 0
    viol_prev = np.inf
    converged = False
    success = False
    for _ in range(opts.max_outer):
        lam_c = lam
        rho_c = rho

        def penalized(xx, lam_c=lam_c, rho_c=rho_c):
            f, g = fun(xx)
            c = cons @ xx - margin
            t = lam_c - rho_c * c
            act = t > 0
            if np.any(act):
                f = f + float(np.sum(t[act] ** 2 - lam_c[act] ** 2)) / (2.0 * rho_c)
                g = g - cons[act].T @ t[act]
            else:
                f = f - float(np.sum(lam_c**2)) / (2.0 * rho_c)
            return f, g

        res = optimize.minimize(
            penalized,
            x,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": max(opts.max_iter, 5 * x.size), "gtol": opts.grad_tol, "ftol": 1e-14},
        )
        x = res.x
        total_iter += res.nit
        success = bool(res.success)
        c = cons @ x - margin
        viol = float(max(0.0, -c.min())) if m else 0.0
        new_lam = np.maximum(0.0, lam - rho * c)
        lam_step = float(np.max(np.abs(new_lam - lam))) if m else 0.0
        lam = new_lam
        if viol <= 1e-9 and lam_step <= 1e-6 * (1.0 + float(np.max(lam, initial=0.0))):
            converged = success
            break
        if viol > 0.25 * viol_prev and viol > 1e-9:
            rho = min(rho * 10.0, 1e10)
        viol_prev = viol

    # stationarity of the Lagrangian at the final multipliers
    _, g = fun(x)
    stat = g - cons.T @ lam if m else g
    stat_norm = float(np.max(np.abs(stat))) if stat.size else 0.0
    if not converged:
        converged = success and (float(max(0.0, -(cons @ x - margin).min(), 0.0)) <= 1e-8)
    return x, total_iter, converged, stat_norm, lam


class _ReparamMap:
    """Bijection between free coefficients and an unconstrained vector.

    Transformation coefficients become a base value plus positive
    increments ``margin + exp(u)``; covariate coefficients pass through.
    """

    def __init__(self, spec: ModelSpec, layout: ParamLayout, margin: float):
        self.spec = spec
        self.layout = layout
        self.margin = margin
        self.kind = spec.basis.kind
        self.centered = spec.centered
        self.n_free = layout.n_free

    def _theta_from_u(self, u):
        if self.kind == "loglinear":
            return np.array([u[0], self.margin + np.exp(u[1])])
        if not self.centered:
            inc = self.margin + np.exp(u[1:])
            return u[0] + np.concatenate([[0.0], np.cumsum(inc)])
        inc_all = self.margin + np.exp(u)
        if self.spec.basis.is_discrete:
            return np.cumsum(inc_all)
        # continuous centered: raw coefficients anchored at zero, then centered
        p = self.n_free + 1
        raw = np.concatenate([[0.0], np.cumsum(inc_all)])
        return raw[: p - 1] - np.mean(raw)

    def _theta_jac(self, u):
        f = self.n_free
        if self.kind == "loglinear":
            return np.array([[1.0, 0.0], [0.0, np.exp(u[1])]])
        if not self.centered:
            jac = np.zeros((f, f))
            jac[:, 0] = 1.0
            e = np.exp(u[1:])
            for j in range(1, f):
                jac[j:, j] = e[j - 1]
            return jac
        e = np.exp(u)
        if self.spec.basis.is_discrete:
            jac = np.zeros((f, f))
            for j in range(f):
                jac[j:, j] = e[j]
            return jac
        p = f + 1
        m = np.zeros((p, f))
        for j in range(f):
            m[j + 1 :, j] = 1.0
        q = np.zeros((f, p))
        q[:, :f] = np.eye(f)
        q -= 1.0 / p
        return q @ m @ np.diag(e)

    def _u_from_theta(self, theta):
        gap = 10.0 * self.margin
        if self.kind == "loglinear":
            slope = max(theta[1] - self.margin, gap)
            return np.array([theta[0], np.log(slope)])
        if not self.centered:
            diffs = np.maximum(np.diff(theta) - self.margin, gap)
            return np.concatenate([[theta[0]], np.log(diffs)])
        if self.spec.basis.is_discrete:
            full = np.concatenate([[0.0], theta])
            diffs = np.maximum(np.diff(full) - self.margin, gap)
            return np.log(diffs)
        # recover raw coefficients anchored at zero: the first centered
        # coefficient pins the mean, the rest follow by shifting
        tb = theta
        raw = np.concatenate([tb - tb[0], [-tb[0] - np.sum(tb)]])
        diffs = np.maximum(np.diff(raw) - self.margin, gap)
        return np.log(diffs)

    def forward(self, u_flat):
        lay = self.layout
        x = u_flat.copy()
        for b in range(lay.n_blocks):
            sl = slice(b * lay.n_free, (b + 1) * lay.n_free)
            x[sl] = self._theta_from_u(u_flat[sl])
        return x

    def jacobian_T_grad(self, u_flat, grad_x):
        lay = self.layout
        g = grad_x.copy()
        for b in range(lay.n_blocks):
            sl = slice(b * lay.n_free, (b + 1) * lay.n_free)
            g[sl] = self._theta_jac(u_flat[sl]).T @ grad_x[sl]
        return g

    def inverse(self, x_flat):
        lay = self.layout
        u = x_flat.copy()
        for b in range(lay.n_blocks):
            sl = slice(b * lay.n_free, (b + 1) * lay.n_free)
            u[sl] = self._u_from_theta(x_flat[sl])
        return u


def _solve_reparam(fun, x0, spec, layout, margin, opts: FitOptions):
    rmap = _ReparamMap(spec, layout, margin)
    u0 = rmap.inverse(x0)

    def in_u(u):
        x = rmap.forward(u)
        f, g = fun(x)
        return f, rmap.jacobian_T_grad(u, g)

    res = optimize.minimize(
        in_u,
        u0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max(opts.max_iter, 5 * u0.size) * opts.max_outer, "gtol": opts.grad_tol, "ftol": 1e-14},
    )
    x = rmap.forward(res.x)
    _, gu = in_u(res.x)
    stat_norm = float(np.max(np.abs(gu))) if gu.size else 0.0
    return x, int(res.nit), bool(res.success), stat_norm, None


def _stationarity(grad, cons, c, margin):
    """Projected gradient max-norm; the score itself when nothing is active."""
    act = np.flatnonzero(c <= 10.0 * margin) if c.size else np.empty(0, dtype=int)
    if act.size:
        z = linalg.null_space(cons[act])
        pg = z.T @ grad if z.shape[1] else np.zeros(1)
    else:
        pg = grad
    return (float(np.max(np.abs(pg))) if pg.size else 0.0), act


def _newton_polish(core: LikelihoodCore, x, cons, margin, opts: FitOptions):
    """Drive the (projected) score below tolerance with Newton steps.

    Quasi-Newton solvers routinely stop a couple of orders of magnitude
    above a 1e-6 gradient norm; one or two Newton corrections with the
    observed information finish the job.  Building that information costs
    one score evaluation per free coordinate, so very high-dimensional
    transformations (large nonparametric bases) skip the polish.
    """
    n_eval = 0
    value, grad, _ = core.evaluate(x)
    if x.size > 400:
        c = cons @ x - margin
        stat, _ = _stationarity(grad, cons, c, margin)
        return x, n_eval, stat
    for _ in range(8):
        c = cons @ x - margin
        stat, act = _stationarity(grad, cons, c, margin)
        if stat <= opts.grad_tol or not np.isfinite(stat):
            return x, n_eval, stat
        info = _fd_information(core, x)
        try:
            if act.size:
                z = linalg.null_space(cons[act])
                if z.shape[1] == 0:
                    break
                step = z @ linalg.solve(z.T @ info @ z, z.T @ grad)
            else:
                step = linalg.solve(info, grad)
        except linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        accepted = False
        alpha = 1.0
        for _ in range(8):
            trial = x + alpha * step
            c_t = cons @ trial - margin
            if (not c_t.size or c_t.min() >= -margin):
                v_t, g_t, _ = core.evaluate(trial)
                n_eval += 1
                stat_t, _ = _stationarity(g_t, cons, c_t, margin)
                if np.isfinite(v_t) and (v_t >= value - 1e-9) and stat_t < stat:
                    x, value, grad = trial, v_t, g_t
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            break
    c = cons @ x - margin
    stat, _ = _stationarity(grad, cons, c, margin)
    return x, n_eval, stat


def _project_feasible(params: ModelParams, spec: ModelSpec, gap: float) -> ModelParams:
    """Project transformation coefficients onto the strictly monotone cone."""
    out = ModelParams(
        theta=params.theta.copy(),
        beta=params.beta.copy(),
        gamma=params.gamma.copy(),
        beta0=params.beta0,
    )
    for b in range(out.n_blocks):
        th = out.theta[b]
        if spec.basis.kind == "loglinear":
            th[1] = max(th[1], gap)
        elif not spec.centered:
            out.theta[b] = _strictify(_pava(th), gap)
        else:
            raw = out.raw_theta(spec, b)
            raw = _strictify(_pava(raw), gap)
            cc = bases.center(spec.basis, raw)
            out.theta[b] = cc.theta_bar
            out.beta0 = cc.beta0
    return out


def _fd_information(core: LikelihoodCore, x: np.ndarray) -> np.ndarray:
    """Observed information from central differences of the analytic score.

    Near an active monotonicity constraint a symmetric step can leave the
    feasible region and return nonfinite scores; those coordinates fall
    back to a one-sided difference on whichever side stays finite.
    """
    n = x.size
    h = 1e-5 * (1.0 + np.abs(x))
    _, g0, _ = core.evaluate(x)
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h[j]
        _, gp, _ = core.evaluate(x + e)
        _, gm, _ = core.evaluate(x - e)
        ok_p = np.all(np.isfinite(gp))
        ok_m = np.all(np.isfinite(gm))
        if ok_p and ok_m:
            jac[:, j] = (gp - gm) / (2.0 * h[j])
        elif ok_p:
            jac[:, j] = (gp - g0) / h[j]
        elif ok_m:
            jac[:, j] = (g0 - gm) / h[j]
        else:
            jac[:, j] = 0.0
    info = -0.5 * (jac + jac.T)
    return info


def _covariance(info, cons, active_rows, flags):
    if not np.all(np.isfinite(info)):
        flags.append("singular_information")
        return np.zeros_like(info)
    if active_rows:
        z = linalg.null_space(cons[active_rows])
        if z.shape[1] == 0:
            flags.append("singular_information")
            return np.zeros_like(info)
        inner = z.T @ info @ z
        try:
            cov_inner = linalg.inv(inner)
        except linalg.LinAlgError:
            cov_inner = linalg.pinvh(inner)
            flags.append("singular_information")
        if not np.all(np.isfinite(cov_inner)):
            cov_inner = linalg.pinvh(inner)
            flags.append("singular_information")
        return z @ cov_inner @ z.T
    try:
        c = linalg.cho_factor(info)
        return linalg.cho_solve(c, np.eye(info.shape[0]))
    except linalg.LinAlgError:
        flags.append("singular_information")
        return linalg.pinvh(info)


def fit(dataset: Dataset, spec: ModelSpec, options: FitOptions | None = None) -> FitResult:
    """Constrained maximum-likelihood fit of the model to the dataset."""
    opts = options or FitOptions()
    if dataset.n == 0:
        raise DataError("cannot fit an empty dataset")
    core = LikelihoodCore(dataset, spec)
    layout = core.layout
    cons = constraint_matrix(spec, layout)
    margin = opts.constraint_margin

    if opts.start is not None:
        x0 = layout.pack(opts.start)
    else:
        x0 = layout.pack(start_values(dataset, spec, margin))
    c0 = cons @ x0 - margin
    if c0.size and c0.min() < 0:
        if c0.min() < -1e-6:
            raise ValueError("starting coefficients violate the monotonicity margin")
        x0 = layout.pack(_project_feasible(layout.unpack(x0), spec, 2.0 * margin))

    fun = _objective(core)
    if opts.optimizer == "auglag":
        x, n_iter, converged, stat_norm, _ = _solve_auglag(fun, x0, cons, margin, opts)
    else:
        x, n_iter, converged, stat_norm, _ = _solve_reparam(
            fun, x0, spec, layout, margin, opts
        )
    x, polish_iter, stat_norm = _newton_polish(core, x, cons, margin, opts)
    n_iter += polish_iter
    converged = stat_norm <= opts.grad_tol or (converged and stat_norm <= 1e2 * opts.grad_tol)

    flags: list[str] = []
    c = cons @ x - margin
    if c.size and c.min() < -margin:
        # project slightly infeasible iterates back onto the cone
        x = layout.pack(_project_feasible(layout.unpack(x), spec, margin))
        c = cons @ x - margin
        flags.append("projected_feasible")

    value, grad, _ = core.evaluate(x)
    params = layout.unpack(x)
    active = [int(i) for i in np.flatnonzero(c <= 10.0 * margin)] if c.size else []

    if not converged:
        flags.append("not_converged")
    if params.gamma.size and float(np.max(np.abs(params.gamma))) > 15.0:
        flags.append("scale_divergence")
        converged = False

    vcov = None
    if opts.compute_vcov:
        info = _fd_information(core, x)
        vcov = _covariance(info, cons, active, flags)

    return FitResult(
        spec=spec,
        params=params,
        loglik=value,
        converged=converged,
        n_iter=n_iter,
        grad_norm=stat_norm,
        layout=layout,
        param_names=layout.names(spec),
        vcov=vcov,
        active_constraints=active,
        flags=flags,
        n_obs=dataset.n,
    )


def fit_unconditional(dataset: Dataset, spec: ModelSpec, options: FitOptions | None = None) -> FitResult:
    """Fit with all covariate effects removed (transformation only)."""
    return fit(dataset, spec.with_terms(location=(), scale=()), options)


@dataclass
class ProfileFit:
    """Transformation refit under fixed per-observation location and scale."""

    theta: np.ndarray
    loglik: float
    converged: bool
    n_iter: int


def profile_fit(dataset: Dataset, spec: ModelSpec, mu, sigma, options: FitOptions | None = None) -> ProfileFit:
    """Maximize over the transformation with mu_i and sigma_i held fixed.

    ``mu`` and ``sigma`` are per-observation location and scale vectors;
    ``sigma`` must be positive.  Returns raw (uncentered) coefficients.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if mu.shape != (dataset.n,) or sigma.shape != (dataset.n,):
        raise DataError("mu and sigma must each have one entry per observation")
    if np.any(sigma <= 0):
        raise DataError("sigma must be positive")
    opts = options or FitOptions()
    plain = ModelSpec(basis=spec.basis.uncentered(), link=spec.link)
    core = LikelihoodCore(dataset, plain, loc_offset=mu, log_s_offset=-np.log(sigma))
    layout = core.layout
    cons = constraint_matrix(plain, layout)
    x0 = layout.pack(start_values(dataset, plain, opts.constraint_margin))
    fun = _objective(core)
    if opts.optimizer == "auglag":
        x, n_iter, conv, _, _ = _solve_auglag(fun, x0, cons, opts.constraint_margin, opts)
    else:
        x, n_iter, conv, _, _ = _solve_reparam(
            fun, x0, plain, layout, opts.constraint_margin, opts
        )
    value, _, _ = core.evaluate(x)
    return ProfileFit(
        theta=layout.unpack(x).theta_block(0),
        loglik=value,
        converged=conv,
        n_iter=n_iter,
    )


@dataclass
class LikelihoodRatioTest:
    statistic: float
    df: int
    p_value: float


def _check_nested(full: FitResult, null: FitResult):
    if full.spec.link != null.spec.link:
        raise ValueError("likelihood ratio test needs a common link")
    if full.spec.basis.uncentered() != null.spec.basis.uncentered():
        raise ValueError("likelihood ratio test needs a common transformation basis")
    if not set(null.spec.location) <= set(full.spec.location):
        raise ValueError("null location terms are not nested in the full model")
    if not set(null.spec.scale) <= set(full.spec.scale):
        raise ValueError("null scale terms are not nested in the full model")
    if null.spec.stratified and not full.spec.stratified:
        raise ValueError("a stratified null is not nested in an unstratified full model")


def lr_test(full: FitResult, null: FitResult) -> LikelihoodRatioTest:
    """Likelihood ratio test of a nested null fit against a full fit."""
    _check_nested(full, null)
    df = full.df - null.df
    stat = 2.0 * (full.loglik - null.loglik)
    if stat < -1e-6:
        raise ValueError(
            "null log-likelihood exceeds the full model; check convergence"
        )
    stat = max(stat, 0.0)
    p = 1.0 if df == 0 else float(stats.chi2.sf(stat, df))
    return LikelihoodRatioTest(statistic=float(stat), df=df, p_value=p)


@dataclass
class WaldTest:
    statistic: float
    df: int
    p_value: float
    flags: list[str] = field(default_factory=list)


def wald_test(result: FitResult, names) -> WaldTest:
    """Wald test that the named coefficients are jointly zero."""
    if result.vcov is None:
        raise ValueError("fit carries no covariance; rerun with compute_vcov")
    idx = [result.param_names.index(nm) for nm in names]
    est = result.layout.pack(result.params)[idx]
    sub = result.vcov[np.ix_(idx, idx)]
    flags = []
    rank = int(np.linalg.matrix_rank(sub))
    if rank < len(idx):
        flags.append("singular_covariance")
        stat = float(est @ np.linalg.pinv(sub) @ est)
    else:
        stat = float(est @ np.linalg.solve(sub, est))
    p = float(stats.chi2.sf(stat, rank)) if rank else 1.0
    return WaldTest(statistic=stat, df=rank, p_value=p, flags=flags)
