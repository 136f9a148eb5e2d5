"""Model specification and the log-likelihood with its analytic score.

The model states that the response, pushed through a monotone
transformation h, follows the error distribution after an affine
adjustment by covariates:

    P(Y <= y | x) = F(s(x) * h(y) - mu(x))

with location mu(x) = x' beta and inverse scale s(x) = exp(x' gamma / 2).
Positive gamma coefficients shrink the transformed response towards its
center, i.e. reduce the conditional scale of Y.

Exact observations contribute the conditional density

    log f(s * h(y) - mu) + log s + log h'(y)

and interval observations (lower, upper] contribute the probability mass

    log [ F(s * h(upper) - mu) - F(s * h(lower) - mu) ].

Censoring, category and count observations are all interval masses after
encoding, so a single pair of formulas covers every response type.

The centered parameterization splits the transformation as
h(y) = hbar(y) - beta0 with an explicit intercept, giving

    z = s(x) * hbar(y) - beta0 - x' beta;

note the intercept is not multiplied by the scale term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bases
from .bases import BasisError, BasisSpec
from .data import DataError, Dataset, ResponseDatum, encode_response
from .links import get_link

_MASS_FLOOR = 1e-300
_MASS_CEIL = 1.0 - 1e-16


@dataclass(frozen=True)
class ModelSpec:
    """Transformation basis, error link, and covariate roles.

    ``location`` and ``scale`` list covariate column names entering mu(x)
    and the log inverse-scale.  With ``stratified`` each stratum of the
    dataset gets its own transformation coefficients while beta and gamma
    stay shared.
    """

    basis: BasisSpec
    link: str = "probit"
    location: tuple[str, ...] = ()
    scale: tuple[str, ...] = ()
    stratified: bool = False

    def __post_init__(self):
        get_link(self.link)  # validate early
        object.__setattr__(self, "location", tuple(self.location))
        object.__setattr__(self, "scale", tuple(self.scale))
        if self.stratified and self.basis.centered:
            raise BasisError("stratified fits use the uncentered parameterization")

    @property
    def centered(self) -> bool:
        return self.basis.centered

    def with_terms(self, location=None, scale=None) -> "ModelSpec":
        return ModelSpec(
            basis=self.basis,
            link=self.link,
            location=self.location if location is None else tuple(location),
            scale=self.scale if scale is None else tuple(scale),
            stratified=self.stratified,
        )


@dataclass
class ModelParams:
    """Coefficients: transformation blocks, location, scale, intercept."""

    theta: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    beta0: float | None = None

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        if th.ndim == 1:
            th = th[None, :]
        self.theta = th
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))

    @property
    def n_blocks(self) -> int:
        return self.theta.shape[0]

    def theta_block(self, b: int = 0) -> np.ndarray:
        return self.theta[b]

    def raw_theta(self, spec: ModelSpec, b: int = 0) -> np.ndarray:
        """Raw (uncentered) transformation coefficients of one block."""
        if not spec.centered:
            return self.theta[b]
        cc = bases.CenteredCoefficients(theta_bar=self.theta[b], beta0=self.beta0)
        return bases.uncenter(spec.basis, cc)


@dataclass(frozen=True)
class ParamLayout:
    """Flat packing order: theta blocks, then beta0, beta, gamma."""

    n_blocks: int
    n_free: int
    n_loc: int
    n_sc: int
    centered: bool

    @property
    def n_theta(self) -> int:
        return self.n_blocks * self.n_free

    @property
    def n_total(self) -> int:
        return self.n_theta + int(self.centered) + self.n_loc + self.n_sc

    def pack(self, params: ModelParams) -> np.ndarray:
        flat = np.empty(self.n_total)
        flat[: self.n_theta] = params.theta.ravel()
        pos = self.n_theta
        if self.centered:
            flat[pos] = params.beta0
            pos += 1
        flat[pos : pos + self.n_loc] = params.beta
        flat[pos + self.n_loc :] = params.gamma
        return flat

    def unpack(self, flat) -> ModelParams:
        flat = np.asarray(flat, dtype=float)
        theta = flat[: self.n_theta].reshape(self.n_blocks, self.n_free)
        pos = self.n_theta
        beta0 = None
        if self.centered:
            beta0 = float(flat[pos])
            pos += 1
        beta = flat[pos : pos + self.n_loc]
        gamma = flat[pos + self.n_loc :]
        return ModelParams(theta=theta, beta=beta, gamma=gamma, beta0=beta0)

    def names(self, spec: ModelSpec) -> list[str]:
        out = []
        for b in range(self.n_blocks):
            prefix = f"theta[{b}]" if self.n_blocks > 1 else "theta"
            out.extend(f"{prefix}[{p}]" for p in range(self.n_free))
        if self.centered:
            out.append("beta0")
        out.extend(f"beta:{c}" for c in spec.location)
        out.extend(f"gamma:{c}" for c in spec.scale)
        return out


def layout_for(spec: ModelSpec, dataset: Dataset) -> ParamLayout:
    n_blocks = dataset.n_strata if spec.stratified else 1
    return ParamLayout(
        n_blocks=n_blocks,
        n_free=spec.basis.n_free,
        n_loc=len(spec.location),
        n_sc=len(spec.scale),
        centered=spec.centered,
    )


class LikelihoodCore:
    """Precomputed designs for fast repeated likelihood evaluation.

    ``loc_offset`` and ``log_s_offset`` add fixed per-observation terms to
    mu and to log s; profile fits over the transformation use them to hold
    the covariate part fixed.
    """

    def __init__(self, dataset: Dataset, spec: ModelSpec, *, loc_offset=None, log_s_offset=None):
        self.spec = spec
        self.link = get_link(spec.link)
        self.layout = layout_for(spec, dataset)
        basis = spec.basis
        n = dataset.n
        self.n = n

        self.w = (
            np.ones(n) if dataset.weights is None else dataset.weights.astype(float)
        )
        if spec.stratified:
            if dataset.stratum is None:
                raise DataError("stratified model needs a stratum column")
            self.strat = dataset.stratum
        else:
            self.strat = np.zeros(n, dtype=int)
        self.xloc = dataset.columns(spec.location)
        self.xsc = dataset.columns(spec.scale)
        self.loc_offset = (
            np.zeros(n) if loc_offset is None else np.asarray(loc_offset, dtype=float)
        )
        self.log_s_offset = (
            np.zeros(n) if log_s_offset is None else np.asarray(log_s_offset, dtype=float)
        )

        exact_idx = [i for i, r in enumerate(dataset.responses) if r.is_exact]
        inter_idx = [i for i, r in enumerate(dataset.responses) if not r.is_exact]
        self.exact_idx = np.asarray(exact_idx, dtype=int)
        self.inter_idx = np.asarray(inter_idx, dtype=int)

        if exact_idx:
            if basis.is_discrete:
                raise BasisError(
                    "exact observations need a continuous basis; "
                    f"the {basis.kind} basis has no density"
                )
            y = np.array([dataset.responses[i].value for i in exact_idx])
            if basis.centered:
                self.a_exact = bases.eval_basis_centered(basis, y)
                self.ad_exact = bases.eval_basis_deriv_centered(basis, y)
            else:
                self.a_exact = bases.eval_basis(basis, y)
                self.ad_exact = bases.eval_basis_deriv(basis, y)
        else:
            self.a_exact = np.empty((0, self.layout.n_free))
            self.ad_exact = np.empty((0, self.layout.n_free))

        if inter_idx:
            lo = np.array([dataset.responses[i].lower for i in inter_idx])
            hi = np.array([dataset.responses[i].upper for i in inter_idx])
            self.a_lo, self.fin_lo, pos_lo = bases.endpoint_rows(basis, lo)
            self.a_hi, self.fin_hi, pos_hi = bases.endpoint_rows(basis, hi)
            if np.any(pos_lo):
                i = inter_idx[int(np.argmax(pos_lo))]
                raise DataError(
                    f"row {i}: interval lies entirely above the response support"
                )
            neg_hi = ~self.fin_hi & ~pos_hi
            if np.any(neg_hi):
                i = inter_idx[int(np.argmax(neg_hi))]
                raise DataError(
                    f"row {i}: interval lies entirely below the response support"
                )
            self.pos_lo = pos_lo
            self.pos_hi = pos_hi
        else:
            f = self.layout.n_free
            self.a_lo = np.empty((0, f))
            self.a_hi = np.empty((0, f))
            self.fin_lo = np.empty(0, dtype=bool)
            self.fin_hi = np.empty(0, dtype=bool)
            self.pos_lo = np.empty(0, dtype=bool)
            self.pos_hi = np.empty(0, dtype=bool)

    def _predictors(self, params: ModelParams):
        mu = self.loc_offset.copy()
        if self.xloc.shape[1]:
            mu += self.xloc @ params.beta
        if self.layout.centered:
            mu += params.beta0
        log_s = self.log_s_offset.copy()
        if self.xsc.shape[1]:
            log_s += 0.5 * (self.xsc @ params.gamma)
        return mu, log_s

    def evaluate(self, flat):
        """Total log-likelihood, flat score vector, and per-row pieces.

        Returns (loglik, score, resid) where resid is the (n, 2) array of
        per-observation derivatives in a location and a log-scale offset
        direction (unweighted).
        """
        params = self.layout.unpack(flat)
        link = self.link
        mu, log_s = self._predictors(params)
        with np.errstate(over="ignore"):
            s = np.exp(log_s)
        th_rows = params.theta[self.strat]

        n = self.n
        ll = np.zeros(n)
        r_loc = np.zeros(n)
        r_sc = np.zeros(n)
        g_theta = np.zeros((self.layout.n_blocks, self.layout.n_free))

        ie = self.exact_idx
        if ie.size:
            h = np.einsum("ij,ij->i", self.a_exact, th_rows[ie])
            hp = np.einsum("ij,ij->i", self.ad_exact, th_rows[ie])
            z = s[ie] * h - mu[ie]
            with np.errstate(over="ignore", invalid="ignore"):
                logf = link.log_density(z)
                dldz = link.log_density_deriv(z)
            hp_safe = np.clip(hp, _MASS_FLOOR, None)
            ll[ie] = logf + log_s[ie] + np.log(hp_safe)
            r_loc[ie] = -dldz
            r_sc[ie] = 0.5 * (dldz * s[ie] * h + 1.0)
            wi = self.w[ie]
            rows = (
                (dldz * s[ie] * wi)[:, None] * self.a_exact
                + (wi / hp_safe)[:, None] * self.ad_exact
            )
            np.add.at(g_theta, self.strat[ie], rows)

        ii = self.inter_idx
        if ii.size:
            h_lo = np.einsum("ij,ij->i", self.a_lo, th_rows[ii])
            h_hi = np.einsum("ij,ij->i", self.a_hi, th_rows[ii])
            s_i = s[ii]
            z_lo = np.where(self.fin_lo, s_i * h_lo - mu[ii], -np.inf)
            z_lo = np.where(self.pos_lo, np.inf, z_lo)
            z_hi = np.where(self.fin_hi, s_i * h_hi - mu[ii], np.inf)
            z_hi = np.where(~self.fin_hi & ~self.pos_hi, -np.inf, z_hi)
            with np.errstate(over="ignore", invalid="ignore"):
                use_sf = (z_lo + z_hi) > 0
                mass = np.where(
                    use_sf,
                    link.sf(z_lo) - link.sf(z_hi),
                    link.cdf(z_hi) - link.cdf(z_lo),
                )
            mass = np.clip(mass, _MASS_FLOOR, _MASS_CEIL)
            ll[ii] = np.log(mass)
            f_lo = np.zeros(ii.size)
            f_hi = np.zeros(ii.size)
            if np.any(self.fin_lo):
                f_lo[self.fin_lo] = link.density(z_lo[self.fin_lo])
            if np.any(self.fin_hi):
                f_hi[self.fin_hi] = link.density(z_hi[self.fin_hi])
            wl = f_lo / mass
            wu = f_hi / mass
            h_lo_fin = np.where(self.fin_lo, h_lo, 0.0)
            h_hi_fin = np.where(self.fin_hi, h_hi, 0.0)
            r_loc[ii] = -(wu - wl)
            r_sc[ii] = 0.5 * s_i * (wu * h_hi_fin - wl * h_lo_fin)
            wi = self.w[ii]
            rows = (s_i * wi)[:, None] * (wu[:, None] * self.a_hi - wl[:, None] * self.a_lo)
            np.add.at(g_theta, self.strat[ii], rows)

        wr_loc = self.w * r_loc
        wr_sc = self.w * r_sc
        g_beta = self.xloc.T @ wr_loc if self.xloc.shape[1] else np.empty(0)
        g_gamma = self.xsc.T @ wr_sc if self.xsc.shape[1] else np.empty(0)

        score = np.empty(self.layout.n_total)
        score[: self.layout.n_theta] = g_theta.ravel()
        pos = self.layout.n_theta
        if self.layout.centered:
            score[pos] = wr_loc.sum()
            pos += 1
        score[pos : pos + self.layout.n_loc] = g_beta
        score[pos + self.layout.n_loc :] = g_gamma

        contrib = np.where(self.w > 0, self.w * ll, 0.0)
        total = float(np.sum(contrib))
        resid = np.column_stack([r_loc, r_sc])
        return total, score, resid


def loglik(dataset: Dataset, spec: ModelSpec, params: ModelParams) -> float:
    """Total weighted log-likelihood of the dataset."""
    core = LikelihoodCore(dataset, spec)
    value, _, _ = core.evaluate(core.layout.pack(params))
    return value


def score(dataset: Dataset, spec: ModelSpec, params: ModelParams) -> np.ndarray:
    """Analytic gradient of the total log-likelihood, in packing order."""
    core = LikelihoodCore(dataset, spec)
    _, grad, _ = core.evaluate(core.layout.pack(params))
    return grad


@dataclass(frozen=True)
class ScoreResiduals:
    """Per-observation score in a location and a log-scale direction.

    Row i is (d l_i / d b, d l_i / d g) for the perturbations
    mu_i -> mu_i + b and log s_i -> log s_i + g / 2, evaluated at given
    parameters.  Under the minimum-extreme-value link with all covariate
    effects at zero, the location column reproduces log-rank scores for
    right-censored data.
    """

    array: np.ndarray

    @property
    def location(self) -> np.ndarray:
        return self.array[:, 0]

    @property
    def scale(self) -> np.ndarray:
        return self.array[:, 1]


def score_residuals(dataset: Dataset, spec: ModelSpec, params: ModelParams) -> ScoreResiduals:
    core = LikelihoodCore(dataset, spec)
    _, _, resid = core.evaluate(core.layout.pack(params))
    return ScoreResiduals(array=resid)


def _single_row_dataset(response, x, spec: ModelSpec) -> Dataset:
    if not isinstance(response, ResponseDatum):
        response = encode_response("exact", response)
    names = list(dict.fromkeys(spec.location + spec.scale))
    if x is None:
        x = {}
    row = [float(x[nm]) for nm in names] if names else []
    return Dataset(
        responses=(response,),
        x=np.asarray([row]) if names else np.empty((1, 0)),
        colnames=tuple(names),
    )


def loglik_exact(response, spec: ModelSpec, params: ModelParams, x=None) -> float:
    """Log density contribution of one exact observation.

    ``x`` maps covariate names to values; omit it for unconditional models.
    """
    ds = _single_row_dataset(response, x, spec)
    if not ds.responses[0].is_exact:
        raise DataError("loglik_exact needs an exact observation")
    return loglik(ds, spec, params)


def loglik_interval(response, spec: ModelSpec, params: ModelParams, x=None) -> float:
    """Log probability mass of one interval observation."""
    ds = _single_row_dataset(response, x, spec)
    if ds.responses[0].is_exact:
        raise DataError("loglik_interval needs an interval observation")
    return loglik(ds, spec, params)


def linear_predictors(spec: ModelSpec, params: ModelParams, x=None, n=1):
    """(mu, log s) for covariate rows given as a mapping of names to values.

    Values may be scalars or equal-length arrays; with no covariates the
    predictors of ``n`` identical rows are returned.
    """
    x = dict(x or {})
    names = list(dict.fromkeys(spec.location + spec.scale))
    if names:
        cols = []
        length = n
        for nm in names:
            if nm not in x:
                raise DataError(f"covariate {nm!r} missing from the row")
            arr = np.atleast_1d(np.asarray(x[nm], dtype=float))
            cols.append(arr)
        length = max(c.size for c in cols)
        cols = [np.full(length, c[0]) if c.size == 1 else c for c in cols]
        mat = np.column_stack(cols)
        by_name = {nm: mat[:, j] for j, nm in enumerate(names)}
        xloc = (
            np.column_stack([by_name[nm] for nm in spec.location])
            if spec.location
            else np.empty((length, 0))
        )
        xsc = (
            np.column_stack([by_name[nm] for nm in spec.scale])
            if spec.scale
            else np.empty((length, 0))
        )
    else:
        length = n
        xloc = np.empty((length, 0))
        xsc = np.empty((length, 0))
    mu = np.zeros(length)
    if xloc.shape[1]:
        mu += xloc @ params.beta
    if spec.centered:
        mu += params.beta0
    log_s = np.zeros(length)
    if xsc.shape[1]:
        log_s += 0.5 * (xsc @ params.gamma)
    return mu, log_s
