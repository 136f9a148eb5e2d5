"""Post-fit inference: curves, comparisons, and permutation score tests.

All conditional quantities derive from the fitted triple (theta, beta,
gamma) through mu(x) and the inverse scale s(x): distribution, density,
quantile, survivor, hazard and odds curves; the probabilistic index
P(Y <= Y' | x, x') comparing two covariate rows; and model-based ROC
curves.  The score tests are permutation tests built on the bivariate
score residuals, with exact conditional moments and Monte-Carlo or
exhaustive permutation p-values.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special, stats

from . import bases
from .data import DataError, Dataset
from .fitter import FitResult, fit_unconditional
from .likelihood import (
    ModelParams,
    ModelSpec,
    linear_predictors,
    score_residuals,
)
from .links import get_link

_CURVE_TARGETS = ("distribution", "survivor", "density", "hazard", "odds", "quantile")


@dataclass(frozen=True)
class CurveRequest:
    """What to predict: a target curve, a grid, and a covariate row.

    ``grid`` holds response values for all targets except "quantile",
    which uses ``probs``.  ``x`` maps covariate names to values; ``stratum``
    picks the transformation block of a stratified fit.
    """

    target: str = "distribution"
    grid: np.ndarray | None = None
    probs: np.ndarray | None = None
    x: dict | None = None
    stratum: int = 0

    def __post_init__(self):
        if self.target not in _CURVE_TARGETS:
            raise ValueError(f"unknown curve target {self.target!r}")
        if self.target == "quantile":
            if self.probs is None:
                raise ValueError("quantile curves need probs")
        elif self.grid is None:
            raise ValueError(f"{self.target} curves need a response grid")


def _predictor_scalars(result: FitResult, x) -> tuple[float, float]:
    mu, log_s = linear_predictors(result.spec, result.params, x, n=1)
    return float(mu[0]), float(np.exp(log_s[0]))


def _transformed_grid(result: FitResult, grid, stratum: int):
    """h (or hbar) on the grid with infinities resolved, plus z values."""
    spec = result.spec
    theta = result.params.theta_block(stratum)
    rows, finite, positive = bases.endpoint_rows(spec.basis, np.asarray(grid, dtype=float))
    h = rows @ theta
    h = np.where(finite, h, np.where(positive, np.inf, -np.inf))
    return h, finite


def predict_curve(result: FitResult, request: CurveRequest) -> np.ndarray:
    """Evaluate the requested conditional curve for one covariate row."""
    spec = result.spec
    link = get_link(spec.link)
    mu, s = _predictor_scalars(result, request.x)
    theta = result.params.theta_block(request.stratum)

    if request.target == "quantile":
        return _quantile_curve(result, np.asarray(request.probs, dtype=float), mu, s, request.stratum)

    grid = np.asarray(request.grid, dtype=float)
    h, finite = _transformed_grid(result, grid, request.stratum)
    with np.errstate(invalid="ignore", over="ignore"):
        z = s * h - mu
    if request.target == "distribution":
        return link.cdf(z)
    if request.target == "survivor":
        return link.sf(z)
    if request.target == "odds":
        with np.errstate(divide="ignore"):
            return link.cdf(z) / link.sf(z)
    # density and hazard need the transformation derivative
    if spec.basis.is_discrete:
        raise DataError(f"{request.target} curves are undefined for discrete bases")
    dens = np.zeros(grid.size)
    if np.any(finite):
        gfin = grid[finite]
        if spec.basis.count_floor:
            raise DataError(
                f"{request.target} curves are undefined for count responses; "
                "request the distribution and difference it"
            )
        hp = bases.transformation_deriv(spec.basis, theta, gfin)
        dens[finite] = link.density(z[finite]) * s * hp
    if request.target == "density":
        return dens
    with np.errstate(divide="ignore", invalid="ignore"):
        haz = dens / link.sf(z)
    return haz


def _quantile_curve(result: FitResult, probs, mu, s, stratum) -> np.ndarray:
    spec = result.spec
    link = get_link(spec.link)
    if np.any((probs <= 0) | (probs >= 1)):
        raise ValueError("quantile probabilities must lie strictly inside (0, 1)")
    target = (link.quantile(probs) + mu) / s
    theta = result.params.theta_block(stratum)
    basis = spec.basis

    if basis.is_discrete or basis.count_floor:
        # smallest response value whose cumulative probability reaches p
        if basis.kind == "ordinal":
            cand = np.arange(1, basis.n_levels + 1, dtype=float)
        elif basis.kind == "nonparametric":
            cand = np.asarray(basis.values, dtype=float)
        else:
            a, b = basis.support
            cand = np.arange(np.ceil(a), np.floor(b) + 1.0)
        h_cand, _ = _transformed_grid(result, cand, stratum)
        out = np.empty(probs.size)
        for i, t in enumerate(target):
            hit = np.flatnonzero(h_cand >= t)
            if hit.size:
                out[i] = cand[hit[0]]
            else:
                out[i] = cand[-1]
                warnings.warn("quantile beyond the response range; clamped")
        return out

    if basis.kind == "loglinear":
        th1, th2 = theta
        return np.exp((target - th1) / th2)

    a, b = basis.support
    h_lo = float(bases.transformation_value(basis, theta, a))
    h_hi = float(bases.transformation_value(basis, theta, b))
    out = np.empty(probs.size)
    below = target <= h_lo
    above = target >= h_hi
    if np.any(below) or np.any(above):
        warnings.warn("quantile outside the basis support; clamped to its ends")
    out[below] = a
    out[above] = b
    todo = ~(below | above)
    if np.any(todo):
        lo = np.full(todo.sum(), a)
        hi = np.full(todo.sum(), b)
        t = target[todo]
        tol = 1e-8 * (b - a)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            hm = bases.transformation_value(basis, theta, mid)
            high = hm >= t
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
            if np.max(hi - lo) <= tol:
                break
        out[todo] = 0.5 * (lo + hi)
    return out


@dataclass(frozen=True)
class ProbabilisticIndex:
    """P(Y <= Y') for one covariate pair, with a delta-method interval."""

    estimate: float
    se: float | None
    lower: float | None
    upper: float | None
    level: float


def _pi_value(link, mu, s, mu_t, s_t, nodes, weights) -> float:
    if link.name == "probit":
        num = mu_t / s_t - mu / s
        den = math.sqrt(1.0 / (s * s) + 1.0 / (s_t * s_t))
        return float(special.ndtr(num / den))
    q = link.quantile(nodes)
    vals = link.cdf((s / s_t) * (q + mu_t) - mu)
    return float(np.sum(weights * vals))


def probabilistic_index(
    result: FitResult, x, x_tilde, level: float = 0.95, n_nodes: int = 64
) -> ProbabilisticIndex:
    """P(Y <= Y') where Y follows the model at x and Y' at x_tilde.

    The probit link has a closed form; other links use Gauss-Legendre
    integration over the probability scale with ``n_nodes`` nodes.
    """
    link = get_link(result.spec.link)
    nodes, weights = np.polynomial.legendre.leggauss(max(int(n_nodes), 64))
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights

    spec = result.spec
    names = [
        nm
        for nm in result.param_names
        if nm == "beta0" or nm.startswith("beta:") or nm.startswith("gamma:")
    ]
    idx = [result.param_names.index(nm) for nm in names]
    flat = result.layout.pack(result.params)

    def value_at(vec) -> float:
        full = flat.copy()
        full[idx] = vec
        p = result.layout.unpack(full)
        mu_a, ls_a = linear_predictors(spec, p, x, n=1)
        mu_b, ls_b = linear_predictors(spec, p, x_tilde, n=1)
        return _pi_value(
            link, float(mu_a[0]), float(np.exp(ls_a[0])), float(mu_b[0]), float(np.exp(ls_b[0])), nodes, weights
        )

    est = value_at(flat[idx])
    if result.vcov is None or not idx:
        return ProbabilisticIndex(estimate=est, se=None, lower=None, upper=None, level=level)
    sub = result.vcov[np.ix_(idx, idx)]
    grad = np.zeros(len(idx))
    base = flat[idx]
    for j in range(len(idx)):
        hstep = 1e-5 * (1.0 + abs(base[j]))
        up = base.copy()
        up[j] += hstep
        dn = base.copy()
        dn[j] -= hstep
        grad[j] = (value_at(up) - value_at(dn)) / (2.0 * hstep)
    var = float(grad @ sub @ grad)
    se = math.sqrt(max(var, 0.0))
    zq = stats.norm.ppf(0.5 + level / 2.0)
    return ProbabilisticIndex(
        estimate=est,
        se=se,
        lower=max(0.0, est - zq * se),
        upper=min(1.0, est + zq * se),
        level=level,
    )


def roc_curve(result: FitResult, x, x_tilde, t_grid) -> np.ndarray:
    """Model-based ROC curve comparing x_tilde ("cases") against x.

    ROC(t) = 1 - F1(F0^{-1}(1 - t)) with F0 the conditional distribution
    at x and F1 at x_tilde; the transformation cancels, leaving only the
    predictors.
    """
    link = get_link(result.spec.link)
    mu0, s0 = _predictor_scalars(result, x)
    mu1, s1 = _predictor_scalars(result, x_tilde)
    t = np.asarray(t_grid, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("ROC arguments must lie in [0, 1]")
    inner = np.clip(1.0 - t, 1e-15, 1.0 - 1e-15)
    z0 = link.quantile(inner)
    return link.sf((s1 / s0) * (z0 + mu0) - mu1)


def _sample_max_abs(corr: np.ndarray, draws: int, seed) -> np.ndarray:
    """Monte-Carlo sample of max_k |Z_k| for Z ~ N(0, corr)."""
    d = corr.shape[0]
    w, v = linalg.eigh(corr)
    w = np.clip(w, 0.0, None)
    root = v * np.sqrt(w)
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x5CE)))
    z = rng.standard_normal((draws, d)) @ root.T
    return np.max(np.abs(z), axis=1)


def equicoordinate_quantile(corr: np.ndarray, level: float, seed, draws: int = 100_000) -> float:
    """Two-sided equicoordinate quantile of a standard MVN, by fixed-seed MC."""
    sample = _sample_max_abs(corr, draws, seed)
    return float(np.quantile(sample, level))


def max_abs_sf(corr: np.ndarray, c: float, seed, draws: int = 100_000) -> float:
    """P(max_k |Z_k| >= c) for Z ~ N(0, corr), by fixed-seed MC."""
    sample = _sample_max_abs(corr, draws, seed)
    return float(np.mean(sample >= c - 1e-12))


def grouping_matrix(dataset: Dataset, var: str) -> tuple[np.ndarray, list[str]]:
    """Covariate columns for a score test: numeric as-is, factors one-hot.

    Ordered factors enter through their level codes so the test respects
    the ordering with a single degree of freedom.
    """
    if var in dataset.factors:
        f = dataset.factors[var]
        if f.codes is None:
            raise DataError(f"factor {var!r} carries no per-row codes")
        if f.ordered:
            return f.codes.astype(float)[:, None], [var]
        levels = len(f.levels)
        g = np.zeros((dataset.n, levels))
        g[np.arange(dataset.n), f.codes] = 1.0
        return g, [f"{var}={lv}" for lv in f.levels]
    return dataset.column(var)[:, None], [var]


@dataclass
class ScoreTest:
    """Permutation score test of association with the model residuals."""

    statistic: np.ndarray
    expectation: np.ndarray
    sd: np.ndarray
    covariance: np.ndarray
    labels: list[str]
    max_stat: float
    quad_stat: float
    quad_df: int
    p_max: float
    p_quad: float
    p_max_perm: float | None = None
    p_quad_perm: float | None = None
    n_perm: int = 0
    exhaustive: bool = False
    seed: int | None = None
    flags: list[str] = field(default_factory=list)


def _perm_moments(g: np.ndarray, r: np.ndarray):
    """Conditional mean and covariance of vec(g' r[pi]) under permutations.

    The vec order is row-major over (component of g, residual column).
    """
    n = g.shape[0]
    s1 = r.sum(axis=0)
    s2 = r.T @ r
    g1 = g.sum(axis=0)
    g2 = g.T @ g
    mean = np.outer(g1, s1 / n).ravel()
    pair = (np.outer(s1, s1) - s2) / (n * (n - 1.0))
    cov = (
        np.kron(g2, s2 / n)
        + np.kron(np.outer(g1, g1) - g2, pair)
        - np.outer(mean, mean)
    )
    return mean, 0.5 * (cov + cov.T)


def _interleave(t_loc: np.ndarray, t_sc: np.ndarray) -> np.ndarray:
    out = np.empty((t_loc.shape[0], 2 * t_loc.shape[1]))
    out[:, 0::2] = t_loc
    out[:, 1::2] = t_sc
    return out


def score_test(
    dataset: Dataset,
    spec: ModelSpec,
    groups,
    *,
    B: int = 9999,
    seed: int = 0,
    exhaustive: bool = False,
    params: ModelParams | None = None,
    residuals: np.ndarray | None = None,
) -> ScoreTest:
    """Permutation test of covariate association with score residuals.

    ``groups`` is a covariate name, a list of names, or an (N, Q) array.
    Residuals are computed at ``params`` when given, else at the
    unconditional fit of ``spec``.  ``B`` Monte-Carlo permutations give the
    permutation p-values; ``exhaustive=True`` enumerates all N!
    permutations instead (N <= 8).  The asymptotic max-type p-value uses a
    fixed-seed equicoordinate normal computation, so it is approximate at
    fixed Monte-Carlo accuracy.
    """
    if isinstance(groups, str):
        g, labels = grouping_matrix(dataset, groups)
    elif isinstance(groups, (list, tuple)) and all(isinstance(v, str) for v in groups):
        parts = [grouping_matrix(dataset, v) for v in groups]
        g = np.column_stack([p[0] for p in parts])
        labels = [lbl for p in parts for lbl in p[1]]
    else:
        g = np.asarray(groups, dtype=float)
        if g.ndim == 1:
            g = g[:, None]
        labels = [f"g{j + 1}" for j in range(g.shape[1])]
    n = dataset.n
    if g.shape[0] != n:
        raise DataError("grouping matrix must have one row per observation")

    if residuals is None:
        if params is None:
            base = fit_unconditional(dataset, spec)
            params = base.params
        r = score_residuals(dataset, spec.with_terms((), ()), params).array
    else:
        r = np.asarray(residuals, dtype=float)

    flags: list[str] = []
    t_obs = _interleave((g.T @ r[:, :1]).T, (g.T @ r[:, 1:]).T).ravel()
    mean, cov = _perm_moments(g, r)
    labels2 = [f"{lbl}:{part}" for lbl in labels for part in ("location", "scale")]

    diag = np.diag(cov)
    scale = float(np.max(diag)) if diag.size else 0.0
    keep = diag > max(scale, 1.0) * 1e-12
    sd = np.sqrt(np.where(keep, diag, 1.0))
    if not np.any(keep):
        flags.append("degenerate_covariance")
        return ScoreTest(
            statistic=t_obs.reshape(-1, 2),
            expectation=mean.reshape(-1, 2),
            sd=np.zeros_like(sd),
            covariance=cov,
            labels=labels2,
            max_stat=0.0,
            quad_stat=0.0,
            quad_df=0,
            p_max=1.0,
            p_quad=1.0,
            n_perm=0,
            seed=seed,
            flags=flags,
        )
    if not np.all(keep):
        flags.append("degenerate_components_dropped")

    dev = t_obs - mean
    std_dev = np.abs(dev) / sd
    max_stat = float(np.max(std_dev[keep]))

    rank = int(np.linalg.matrix_rank(cov, tol=None, hermitian=True))
    cov_pinv = linalg.pinvh(cov)
    quad_stat = float(dev @ cov_pinv @ dev)
    p_quad = float(stats.chi2.sf(quad_stat, rank)) if rank else 1.0

    sub = cov[np.ix_(keep.nonzero()[0], keep.nonzero()[0])]
    d = np.sqrt(np.diag(sub))
    corr = sub / np.outer(d, d)
    p_max = max_abs_sf(corr, max_stat, seed)

    p_max_perm = None
    p_quad_perm = None
    n_perm = 0
    if exhaustive:
        if n > 8:
            raise ValueError("exhaustive permutation is limited to 8 observations")
        stats_max = []
        stats_quad = []
        for perm in itertools.permutations(range(n)):
            rp = r[list(perm)]
            tb = _interleave((g.T @ rp[:, :1]).T, (g.T @ rp[:, 1:]).T).ravel()
            db = tb - mean
            stats_max.append(np.max(np.abs(db)[keep] / sd[keep]))
            stats_quad.append(db @ cov_pinv @ db)
        stats_max = np.asarray(stats_max)
        stats_quad = np.asarray(stats_quad)
        n_perm = stats_max.size
        tol = 1e-9
        p_max_perm = float(np.mean(stats_max >= max_stat - tol))
        p_quad_perm = float(np.mean(stats_quad >= quad_stat - tol))
    elif B and B > 0:
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x9E7)))
        count_max = 0
        count_quad = 0
        chunk = max(1, min(int(B), max(1, 20_000_000 // max(n, 1))))
        done = 0
        tol = 1e-9
        base_idx = np.arange(n)
        while done < B:
            m = min(chunk, B - done)
            idx = rng.permuted(np.tile(base_idx, (m, 1)), axis=1)
            t_loc = r[:, 0][idx] @ g
            t_sc = r[:, 1][idx] @ g
            tb = _interleave(t_loc, t_sc)
            db = tb - mean
            sm = np.max(np.abs(db[:, keep]) / sd[keep], axis=1)
            sq = np.einsum("bi,ij,bj->b", db, cov_pinv, db)
            count_max += int(np.sum(sm >= max_stat - tol))
            count_quad += int(np.sum(sq >= quad_stat - tol))
            done += m
        n_perm = B
        p_max_perm = (1.0 + count_max) / (B + 1.0)
        p_quad_perm = (1.0 + count_quad) / (B + 1.0)

    return ScoreTest(
        statistic=t_obs.reshape(-1, 2),
        expectation=mean.reshape(-1, 2),
        sd=sd,
        covariance=cov,
        labels=labels2,
        max_stat=max_stat,
        quad_stat=quad_stat,
        quad_df=rank,
        p_max=p_max,
        p_quad=p_quad,
        p_max_perm=p_max_perm,
        p_quad_perm=p_quad_perm,
        n_perm=n_perm,
        exhaustive=exhaustive,
        seed=seed,
        flags=flags,
    )


@dataclass
class SimultaneousCI:
    """Single-step simultaneous confidence intervals for named coefficients."""

    labels: list[str]
    estimate: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    critical: float
    level: float


def simultaneous_ci(
    result: FitResult,
    names=None,
    contrast: np.ndarray | None = None,
    level: float = 0.95,
    seed: int = 0,
) -> SimultaneousCI:
    """Equicoordinate intervals covering all named coefficients jointly.

    ``contrast`` optionally replaces the coefficients by linear
    combinations (one row per interval).  The critical value is the
    equicoordinate normal quantile under the estimated correlation,
    computed by fixed-seed Monte Carlo.
    """
    if result.vcov is None:
        raise ValueError("fit carries no covariance; rerun with compute_vcov")
    if names is None:
        names = [
            nm
            for nm in result.param_names
            if nm.startswith("beta:") or nm.startswith("gamma:")
        ]
    idx = [result.param_names.index(nm) for nm in names]
    est = result.layout.pack(result.params)[idx]
    cov = result.vcov[np.ix_(idx, idx)]
    labels = list(names)
    if contrast is not None:
        contrast = np.asarray(contrast, dtype=float)
        est = contrast @ est
        cov = contrast @ cov @ contrast.T
        labels = [f"c{k + 1}" for k in range(contrast.shape[0])]
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    pos = se > 0
    corr = np.eye(cov.shape[0])
    if np.any(pos):
        sub = cov[np.ix_(pos.nonzero()[0], pos.nonzero()[0])]
        dd = np.sqrt(np.diag(sub))
        corr = sub / np.outer(dd, dd)
    crit = equicoordinate_quantile(corr, level, seed)
    return SimultaneousCI(
        labels=labels,
        estimate=est,
        se=se,
        lower=est - crit * se,
        upper=est + crit * se,
        critical=crit,
        level=level,
    )
