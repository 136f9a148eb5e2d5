"""Recursive partitioning driven by the model's score residuals.

Each node fits the unconditional model (transformation only) to its rows
and computes the bivariate score residuals, one location and one
log-scale derivative per observation.  Every partitioning variable is
tested for association with the residual pair through a permutation
score test; the smallest Bonferroni-adjusted p-value selects the split
variable when it clears the significance level.  The split point then
maximizes the two-degree-of-freedom quadratic statistic over all
order-respecting binary splits with large enough children.

Because the residuals carry both location and scale information, nodes
split on variables that change the spread of the response even when its
center stays put.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .data import DataError, Dataset
from .fitter import FitOptions, FitResult, fit_unconditional
from .inference import score_test
from .likelihood import ModelSpec, score_residuals


@dataclass
class TreeOptions:
    """Growth controls.

    ``alpha`` is the significance level after Bonferroni adjustment over
    the tested variables; ``min_node_size`` the smallest admissible child
    (never below twice the transformation dimension); ``B`` the number of
    permutation draws per node test (0 uses the asymptotic p-value).
    """

    alpha: float = 0.05
    min_node_size: int = 20
    max_depth: int | None = None
    B: int = 0
    seed: int = 0
    variables: tuple[str, ...] | None = None
    fit_options: FitOptions = field(default_factory=lambda: FitOptions(compute_vcov=False))


@dataclass(frozen=True)
class SplitRule:
    """Binary routing rule: numeric threshold or a set of left levels."""

    var: str
    kind: str  # "numeric" or "levels"
    cutpoint: float | None = None
    left_levels: tuple[str, ...] | None = None

    def goes_left(self, value) -> bool:
        if self.kind == "numeric":
            return float(value) <= self.cutpoint
        return str(value) in self.left_levels

    def describe(self) -> str:
        if self.kind == "numeric":
            return f"{self.var} <= {self.cutpoint:.6g}"
        return f"{self.var} in {{{', '.join(self.left_levels)}}}"


@dataclass
class TreeNode:
    id: int
    depth: int
    n: int
    fit: FitResult | None
    p_values: dict[str, float] = field(default_factory=dict)
    split: SplitRule | None = None
    children: tuple["TreeNode", ...] = ()
    reason: str = ""

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class Tree:
    """A fitted partition with per-leaf transformation models."""

    root: TreeNode
    spec: ModelSpec
    options: TreeOptions

    def nodes(self) -> list[TreeNode]:
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(reversed(node.children))
        return out

    def leaves(self) -> list[TreeNode]:
        return [nd for nd in self.nodes() if nd.is_leaf]

    def node_for(self, x: dict) -> TreeNode:
        """Route one covariate row (a name -> value mapping) to its leaf."""
        node = self.root
        best = node if node.fit is not None else None
        while not node.is_leaf:
            value = x.get(node.split.var)
            if value is None:
                raise DataError(f"routing needs a value for {node.split.var!r}")
            node = node.children[0 if node.split.goes_left(value) else 1]
            if node.fit is not None:
                best = node
        if best is None:
            raise DataError("tree has no fitted node along this path")
        return best

    def leaf_ids(self, dataset: Dataset) -> np.ndarray:
        """Leaf node id for every dataset row."""
        out = np.empty(dataset.n, dtype=int)
        for i in range(dataset.n):
            row = {}
            for nm in dataset.colnames:
                row[nm] = dataset.x[i, dataset.colnames.index(nm)]
            for fname, f in dataset.factors.items():
                if f.codes is not None:
                    row[fname] = f.levels[f.codes[i]]
            out[i] = self.node_for(row).id
        return out

    def to_dict(self) -> dict:
        def conv(node: TreeNode) -> dict:
            d = {
                "id": node.id,
                "n": node.n,
                "depth": node.depth,
                "p_values": node.p_values,
                "reason": node.reason,
            }
            if node.fit is not None:
                d["loglik"] = node.fit.loglik
                d["theta"] = node.fit.params.theta_block(0).tolist()
            if node.split is not None:
                d["split"] = {
                    "var": node.split.var,
                    "kind": node.split.kind,
                    "cutpoint": node.split.cutpoint,
                    "left_levels": list(node.split.left_levels or []) or None,
                }
            if node.children:
                d["children"] = [conv(c) for c in node.children]
            return d

        return conv(self.root)

    def render(self) -> str:
        lines = []

        def walk(node: TreeNode, prefix: str, label: str):
            pv = ""
            if node.p_values:
                var, p = min(node.p_values.items(), key=lambda kv: kv[1])
                pv = f" (min p={p:.4f} at {var})"
            lines.append(f"{prefix}{label}node {node.id}: n={node.n}{pv}")
            if node.split is not None:
                lines.append(f"{prefix}  split: {node.split.describe()}")
            for i, child in enumerate(node.children):
                walk(child, prefix + "  ", "L " if i == 0 else "R ")

        walk(self.root, "", "")
        return "\n".join(lines)


def _binary_split_stats(r: np.ndarray, left_counts: np.ndarray, t_left: np.ndarray):
    """Quadratic statistics for indicator splits, vectorized over candidates.

    ``t_left[c]`` holds the residual sums of the left group of candidate c,
    ``left_counts[c]`` its size.  Moments follow the permutation framework
    with a one-column indicator design.
    """
    n = r.shape[0]
    s1 = r.sum(axis=0)
    s2 = r.T @ r
    k = left_counts.astype(float)
    mean = k[:, None] * (s1 / n)
    pair = (np.outer(s1, s1) - s2) / (n * (n - 1.0))
    cov = (
        k[:, None, None] * (s2 / n)
        + (k * k - k)[:, None, None] * pair
        - np.einsum("ci,cj->cij", mean, mean)
    )
    d = t_left - mean
    det = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] * cov[:, 1, 0]
    scale = np.maximum(cov[:, 0, 0] * cov[:, 1, 1], 1e-300)
    stat = np.empty(k.size)
    ok = det > 1e-12 * scale
    if np.any(ok):
        inv00 = cov[ok, 1, 1] / det[ok]
        inv11 = cov[ok, 0, 0] / det[ok]
        inv01 = -cov[ok, 0, 1] / det[ok]
        stat[ok] = (
            d[ok, 0] ** 2 * inv00 + 2.0 * d[ok, 0] * d[ok, 1] * inv01 + d[ok, 1] ** 2 * inv11
        )
    for c in np.flatnonzero(~ok):
        stat[c] = float(d[c] @ linalg.pinvh(cov[c]) @ d[c])
    return stat


def _best_numeric_split(values: np.ndarray, r: np.ndarray, min_child: int):
    """Best threshold on a numeric variable, or None."""
    order = np.argsort(values, kind="stable")
    v_sorted = values[order]
    r_sorted = r[order]
    csum = np.cumsum(r_sorted, axis=0)
    n = values.size
    # candidate boundaries after position i (0-based): left size i + 1
    distinct = np.flatnonzero(np.diff(v_sorted) > 0)
    if distinct.size == 0:
        return None
    k = distinct + 1
    keep = (k >= min_child) & (n - k >= min_child)
    if not np.any(keep):
        return None
    k = k[keep]
    boundary = distinct[keep]
    t_left = csum[boundary]
    stat = _binary_split_stats(r, k, t_left)
    best = int(np.argmax(stat))
    # ties resolve to the lowest cutpoint through argmax on first occurrence
    cut = 0.5 * (v_sorted[boundary[best]] + v_sorted[boundary[best] + 1])
    return float(cut), float(stat[best])


def _best_level_split(codes: np.ndarray, levels, ordered: bool, r: np.ndarray, min_child: int):
    """Best split over factor levels: ordered cuts or arbitrary subsets."""
    present = np.unique(codes)
    if present.size < 2:
        return None
    n = codes.size
    sums = np.zeros((len(levels), 2))
    counts = np.zeros(len(levels))
    for lv in present:
        mask = codes == lv
        sums[lv] = r[mask].sum(axis=0)
        counts[lv] = mask.sum()
    if ordered:
        cand_sets = [tuple(present[: i + 1]) for i in range(present.size - 1)]
    else:
        # canonical proper subsets: fix the first present level on the left
        rest = list(present[1:])
        cand_sets = []
        for mask_bits in range((1 << len(rest)) - 1):
            subset = [present[0]] + [rest[j] for j in range(len(rest)) if mask_bits >> j & 1]
            cand_sets.append(tuple(subset))
    lefts = []
    t_lefts = []
    kept_sets = []
    for s in cand_sets:
        k = int(counts[list(s)].sum())
        if k < min_child or n - k < min_child:
            continue
        lefts.append(k)
        t_lefts.append(sums[list(s)].sum(axis=0))
        kept_sets.append(s)
    if not kept_sets:
        return None
    stat = _binary_split_stats(r, np.asarray(lefts), np.asarray(t_lefts))
    best = int(np.argmax(stat))
    left_levels = tuple(str(levels[c]) for c in kept_sets[best])
    return left_levels, float(stat[best])


def _node_seed(base_seed: int, node_id: int, j: int) -> int:
    ss = np.random.SeedSequence((int(base_seed), int(node_id), int(j)))
    return int(ss.generate_state(1)[0])


def grow_tree(dataset: Dataset, spec: ModelSpec, options: TreeOptions | None = None) -> Tree:
    """Grow a location-scale partition of the unconditional model."""
    opts = options or TreeOptions()
    spec = spec.with_terms(location=(), scale=())
    variables = list(
        opts.variables if opts.variables is not None else dataset.tree_variables()
    )
    if not variables:
        raise DataError("no partitioning variables available")
    min_child = max(opts.min_node_size, 2 * spec.basis.n_params)

    def build(ds: Dataset, node_id: int, depth: int) -> TreeNode:
        try:
            res = fit_unconditional(ds, spec, opts.fit_options)
        except (DataError, ValueError) as exc:
            return TreeNode(
                id=node_id, depth=depth, n=ds.n, fit=None, reason=f"fit_failed: {exc}"
            )
        node = TreeNode(id=node_id, depth=depth, n=ds.n, fit=res)
        if opts.max_depth is not None and depth >= opts.max_depth:
            node.reason = "max_depth"
            return node
        if ds.n < 2 * min_child:
            node.reason = "min_size"
            return node

        r = score_residuals(ds, res.spec, res.params).array
        p_adj = {}
        for j, var in enumerate(variables):
            if var not in ds.factors:
                col = ds.column(var)
                if np.all(col == col[0]):
                    continue
            else:
                codes = ds.factors[var].codes
                if codes is None or np.unique(codes).size < 2:
                    continue
            st = score_test(
                ds,
                spec,
                var,
                B=opts.B,
                seed=_node_seed(opts.seed, node_id, j),
                residuals=r,
            )
            p = st.p_quad_perm if (opts.B and st.p_quad_perm is not None) else st.p_quad
            p_adj[var] = min(1.0, p * len(variables))
        node.p_values = p_adj
        if not p_adj:
            node.reason = "no_variation"
            return node
        best_var = min(p_adj, key=lambda v: (p_adj[v], variables.index(v)))
        if p_adj[best_var] > opts.alpha:
            node.reason = "no_significant_variable"
            return node

        if best_var in ds.factors:
            f = ds.factors[best_var]
            found = _best_level_split(f.codes, f.levels, f.ordered, r, min_child)
            if found is None:
                node.reason = "min_size"
                return node
            left_levels, _ = found
            rule = SplitRule(var=best_var, kind="levels", left_levels=left_levels)
            left_mask = np.isin([f.levels[c] for c in f.codes], left_levels)
        else:
            vals = ds.column(best_var)
            found = _best_numeric_split(vals, r, min_child)
            if found is None:
                node.reason = "min_size"
                return node
            cut, _ = found
            rule = SplitRule(var=best_var, kind="numeric", cutpoint=cut)
            left_mask = vals <= cut

        node.split = rule
        left = build(ds.subset(left_mask), 2 * node_id, depth + 1)
        right = build(ds.subset(~left_mask), 2 * node_id + 1, depth + 1)
        node.children = (left, right)
        return node

    root = build(dataset, 1, 0)
    return Tree(root=root, spec=spec, options=opts)
