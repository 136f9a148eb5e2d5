"""Best-subset selection of location and scale terms.

The candidate set is every (term, covariate) pair of the model: location
coefficients first, then scale coefficients.  A subset of exactly s
candidates is scored by its restricted maximum likelihood, and the
selected support size minimizes

    SIC(s) = -loglik(s) + s * log(D) * log(log(N))

with D the number of candidates.  Mandatory candidates are always active
and never counted in s.

For each s the active set starts from the candidates most correlated with
the score residuals of the mandatory-only fit and is then improved by
splicing: exchange the k least useful active candidates (smallest
log-likelihood drop when removed, measured by exact refits) against the k
most promising inactive ones (largest gain when added), accepting an
exchange when the refitted log-likelihood improves by more than a
threshold tau_s.  Iteration stops at a fixed point or when an active set
repeats.

Selection always runs in the centered parameterization so that the
explicit intercept absorbs the location identification and candidate
coefficients are comparable; the intercept itself is always mandatory.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .bases import BasisError
from .data import DataError, Dataset
from .fitter import FitOptions, FitResult, fit
from .likelihood import ModelParams, ModelSpec, score_residuals


def sic(loglik: float, support_size: int, n_covariates: int, n_obs: int) -> float:
    """Selection information criterion -loglik + |support| log(2J) loglog(N)."""
    if n_obs <= 3:
        raise ValueError("the SIC penalty needs more than three observations")
    return -loglik + support_size * (
        math.log(2.0 * n_covariates) * math.log(math.log(n_obs))
    )


def _penalty_unit(n_candidates: int, n_obs: int) -> float:
    if n_obs <= 3:
        raise ValueError("selection needs more than three observations")
    return math.log(float(n_candidates)) * math.log(math.log(float(n_obs)))


@dataclass
class SelectOptions:
    """Controls for the subset search.

    ``s_max`` bounds the support size (default: all candidates);
    ``k_max`` the largest exchange size per splicing round (default: s).
    ``tau_scale`` scales the acceptance threshold
    tau_s = tau_scale * s * log(D) * loglog(N).  ``mandatory`` lists
    parameter labels ("beta:age", "gamma:sex") to keep active and
    unpenalized.
    """

    s_max: int | None = None
    k_max: int | None = None
    tau_scale: float = 0.01
    mandatory: tuple[str, ...] = ()
    seed: int | None = None  # reserved; the search itself is deterministic
    fit_options: FitOptions = field(
        default_factory=lambda: FitOptions(optimizer="reparam", compute_vcov=False)
    )


@dataclass
class PathEntry:
    """One support size on the selection path."""

    s: int
    active: tuple[str, ...]
    params: ModelParams
    loglik: float
    sic: float
    converged: bool


@dataclass
class SubsetPath:
    """The whole path plus the SIC-optimal entry."""

    entries: list[PathEntry]
    selected: PathEntry
    candidates: list[str]
    mandatory: tuple[str, ...]

    @property
    def selected_s(self) -> int:
        return self.selected.s


class _Searcher:
    """Shared machinery: candidate bookkeeping and cached restricted fits."""

    def __init__(self, dataset: Dataset, spec: ModelSpec, options: SelectOptions):
        if spec.stratified:
            raise BasisError("subset selection does not support stratified fits")
        if spec.basis.kind == "loglinear":
            raise BasisError(
                "subset selection needs a centerable basis (not loglinear)"
            )
        self.dataset = dataset
        self.spec = spec.with_terms()  # copy
        if not spec.centered:
            self.spec = ModelSpec(
                basis=spec.basis.as_centered(),
                link=spec.link,
                location=spec.location,
                scale=spec.scale,
            )
        self.options = options
        self.candidates = [f"beta:{c}" for c in self.spec.location] + [
            f"gamma:{c}" for c in self.spec.scale
        ]
        if not self.candidates:
            raise DataError("no location or scale candidates to select from")
        unknown = [m for m in options.mandatory if m not in self.candidates]
        if unknown:
            raise DataError(f"mandatory labels not among candidates: {unknown}")
        self.mandatory = tuple(options.mandatory)
        self.selectable = [c for c in self.candidates if c not in self.mandatory]
        self.cache: dict[frozenset, FitResult] = {}
        self.base_params: ModelParams | None = None

    def _spec_for(self, active: frozenset) -> ModelSpec:
        loc = tuple(c for c in self.spec.location if f"beta:{c}" in active)
        sc = tuple(c for c in self.spec.scale if f"gamma:{c}" in active)
        return self.spec.with_terms(location=loc, scale=sc)

    def _warm_start(self, sub: ModelSpec, warm: FitResult | None) -> ModelParams | None:
        """Start for a restricted fit, borrowing from a nearby fitted support."""
        if warm is None:
            if self.base_params is None:
                return None
            return ModelParams(
                theta=self.base_params.theta.copy(),
                beta=np.zeros(len(sub.location)),
                gamma=np.zeros(len(sub.scale)),
                beta0=self.base_params.beta0,
            )
        wb = dict(zip(warm.spec.location, warm.params.beta))
        wg = dict(zip(warm.spec.scale, warm.params.gamma))
        return ModelParams(
            theta=warm.params.theta.copy(),
            beta=np.array([wb.get(c, 0.0) for c in sub.location]),
            gamma=np.array([wg.get(c, 0.0) for c in sub.scale]),
            beta0=warm.params.beta0,
        )

    def fit_active(self, active: frozenset, warm: FitResult | None = None) -> FitResult:
        key = frozenset(active) | frozenset(self.mandatory)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        sub = self._spec_for(key)
        opts = self.options.fit_options
        run = FitOptions(
            optimizer=opts.optimizer,
            grad_tol=opts.grad_tol,
            constraint_margin=opts.constraint_margin,
            max_iter=opts.max_iter,
            max_outer=opts.max_outer,
            start=self._warm_start(sub, warm),
            compute_vcov=False,
        )
        res = fit(self.dataset, sub, run)
        self.cache[key] = res
        return res

    def polish(self, res: FitResult) -> FitResult:
        """Refit a search result with the accurate optimizer before scoring.

        Splicing explores supports with fast warm-started fits.  Warm
        chains can settle in a local optimum a few log-likelihood units
        short of the best one, which distorts the SIC comparison across
        support sizes, so each final per-support fit is redone with the
        constrained optimizer twice: once warm-started at the search
        result and once cold.  The best of the three is kept and cached
        so later warm starts benefit as well.
        """
        opts = self.options.fit_options
        out = res
        for start in (res.params, None):
            run = FitOptions(
                optimizer="auglag",
                grad_tol=opts.grad_tol,
                constraint_margin=opts.constraint_margin,
                max_iter=opts.max_iter,
                max_outer=opts.max_outer,
                start=start,
                compute_vcov=False,
            )
            cand = fit(self.dataset, res.spec, run)
            if cand.loglik > out.loglik:
                out = cand
        key = frozenset(f"beta:{c}" for c in res.spec.location) | frozenset(
            f"gamma:{c}" for c in res.spec.scale
        )
        self.cache[key] = out
        return out

    def embed(self, res: FitResult) -> ModelParams:
        """Coefficients of a restricted fit in full-model shape (zeros elsewhere)."""
        beta = np.zeros(len(self.spec.location))
        gamma = np.zeros(len(self.spec.scale))
        for j, c in enumerate(res.spec.location):
            beta[self.spec.location.index(c)] = res.params.beta[j]
        for j, c in enumerate(res.spec.scale):
            gamma[self.spec.scale.index(c)] = res.params.gamma[j]
        return ModelParams(
            theta=res.params.theta.copy(),
            beta=beta,
            gamma=gamma,
            beta0=res.params.beta0,
        )


def _initial_active(searcher: _Searcher, s: int) -> list[str]:
    """The s selectable candidates most correlated with the score residuals."""
    ds = searcher.dataset
    base = searcher.fit_active(frozenset())
    resid_spec = base.spec
    r = score_residuals(ds, resid_spec, base.params).array
    rho = []
    for cand in searcher.selectable:
        term, col = cand.split(":", 1)
        xcol = ds.column(col)
        target = r[:, 0] if term == "beta" else r[:, 1]
        sx = np.std(xcol)
        st = np.std(target)
        if sx <= 0 or st <= 0:
            rho.append(0.0)
        else:
            c = np.corrcoef(xcol, target)[0, 1]
            rho.append(0.0 if not np.isfinite(c) else abs(c))
    order = sorted(range(len(rho)), key=lambda i: (-rho[i], i))
    return [searcher.selectable[i] for i in order[:s]]


def _splice(
    searcher: _Searcher,
    active: list[str],
    s: int,
    tau: float,
    k_max: int,
    warm: FitResult | None = None,
):
    """Splicing rounds from the given active set; returns the fixed point."""
    current = list(active)
    res = searcher.fit_active(frozenset(current), warm=warm)
    visited = {frozenset(current)}
    while True:
        ll = res.loglik
        inactive = [c for c in searcher.selectable if c not in current]
        if not current or not inactive:
            break
        sacrifice = {}
        for a in current:
            rest = frozenset(c for c in current if c != a)
            sacrifice[a] = ll - searcher.fit_active(rest, warm=res).loglik
        gain = {}
        for j in inactive:
            grown = frozenset(current) | {j}
            gain[j] = searcher.fit_active(grown, warm=res).loglik - ll
        drop_order = sorted(current, key=lambda a: (sacrifice[a], searcher.selectable.index(a)))
        add_order = sorted(
            inactive, key=lambda j: (-gain[j], searcher.selectable.index(j))
        )
        accepted = False
        for k in range(1, min(k_max, len(current), len(inactive)) + 1):
            trial = [c for c in current if c not in drop_order[:k]] + add_order[:k]
            key = frozenset(trial)
            if key in visited:
                continue
            cand_res = searcher.fit_active(key, warm=res)
            if cand_res.loglik > ll + tau:
                current = sorted(trial, key=searcher.selectable.index)
                res = cand_res
                visited.add(key)
                accepted = True
                break
        if not accepted:
            break
    return current, res


def select(dataset: Dataset, spec: ModelSpec, options: SelectOptions | None = None) -> SubsetPath:
    """Best-subset path over support sizes with SIC-optimal choice."""
    opts = options or SelectOptions()
    searcher = _Searcher(dataset, spec, opts)
    d = len(searcher.selectable)
    n = dataset.n
    unit = _penalty_unit(len(searcher.candidates), n)
    s_max = d if opts.s_max is None else min(int(opts.s_max), d)

    base = searcher.fit_active(frozenset())
    searcher.base_params = base.params
    base = searcher.polish(base)
    searcher.base_params = base.params

    entries = []
    entry0 = PathEntry(
        s=0,
        active=(),
        params=searcher.embed(base),
        loglik=base.loglik,
        sic=-base.loglik,
        converged=base.converged,
    )
    entries.append(entry0)

    prev_res = base
    for s in range(1, s_max + 1):
        tau = opts.tau_scale * s * unit
        k_max = s if opts.k_max is None else min(opts.k_max, s)
        init = _initial_active(searcher, s)
        active, res = _splice(searcher, init, s, tau, k_max, warm=prev_res)
        res = searcher.polish(res)
        prev_res = res
        entries.append(
            PathEntry(
                s=len(active),
                active=tuple(sorted(active, key=searcher.selectable.index)),
                params=searcher.embed(res),
                loglik=res.loglik,
                sic=-res.loglik + len(active) * unit,
                converged=res.converged,
            )
        )

    best = min(entries, key=lambda e: (e.sic, e.s))
    return SubsetPath(
        entries=entries,
        selected=best,
        candidates=searcher.candidates,
        mandatory=searcher.mandatory,
    )


def exhaustive_search(
    dataset: Dataset, spec: ModelSpec, s: int, options: SelectOptions | None = None
):
    """Best subset of exactly s candidates by full enumeration (small problems)."""
    opts = options or SelectOptions()
    searcher = _Searcher(dataset, spec, opts)
    base = searcher.fit_active(frozenset())
    searcher.base_params = base.params
    best_set = None
    best_res = None
    best_ll = -np.inf
    for combo in itertools.combinations(searcher.selectable, s):
        res = searcher.fit_active(frozenset(combo))
        if res.loglik > best_ll + 1e-12:
            best_ll = res.loglik
            best_set = combo
            best_res = res
    if best_res is not None:
        best_ll = searcher.polish(best_res).loglik
    return tuple(best_set or ()), float(best_ll)
