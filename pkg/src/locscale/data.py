"""Response encoding and the dataset container.

Every response is stored as either an exact value or a half-open interval
``(lower, upper]``; censoring, ordered categories, and counts are all
interval observations after encoding:

* right-censored at t   -> (t, +inf)
* left-censored at t    -> (-inf, t], or (0, t] on positive supports
* ordered category k of K -> (k - 1, k] on the category index scale
* count n               -> (n - 1, n]

Covariates live in a plain numeric matrix with named columns.  Categorical
covariates are expanded to treatment contrasts (first level as baseline) at
ingestion; the original grouping is kept in ``factors`` so that tree and
test routines can address a categorical variable as one unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd


class DataError(ValueError):
    """Raised for malformed responses or covariates."""


@dataclass(frozen=True)
class ResponseDatum:
    """One encoded response observation.

    Exact observations carry ``value``; interval observations carry
    ``lower`` and ``upper`` with the mass on ``(lower, upper]``.  ``kind``
    remembers how the observation arose ("exact", "interval", "left",
    "right", "ordinal", "count").
    """

    kind: str
    value: float | None = None
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if self.kind == "exact":
            if self.value is None or not math.isfinite(self.value):
                raise DataError("exact response needs a finite value")
        else:
            lo = -math.inf if self.lower is None else float(self.lower)
            hi = math.inf if self.upper is None else float(self.upper)
            if math.isnan(lo) or math.isnan(hi):
                raise DataError("interval endpoints cannot be NaN")
            if not lo < hi:
                raise DataError(f"degenerate interval ({lo}, {hi}]")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"

    def midpoint(self) -> float:
        """Representative finite value, used for crude starting values."""
        if self.is_exact:
            return self.value
        lo, hi = self.lower, self.upper
        if math.isfinite(lo) and math.isfinite(hi):
            return 0.5 * (lo + hi)
        return lo if math.isfinite(lo) else hi


def encode_response(kind, value, *, levels=None, positive=False) -> ResponseDatum:
    """Encode one raw observation as a ResponseDatum.

    Parameters
    ----------
    kind : str
        "exact", "right", "left", "interval", "ordinal" or "count".
    value : scalar, pair, or ResponseDatum
        The observation.  "interval" expects a (lower, upper] pair; the
        others expect a scalar.  A ResponseDatum passes through unchanged,
        so encoding is idempotent.
    levels : sequence, optional
        Ordered category labels, required for kind "ordinal".
    positive : bool
        For left censoring, use 0 instead of -inf as the lower endpoint
        (responses known to be positive).
    """
    if isinstance(value, ResponseDatum):
        return value
    if kind == "exact":
        return ResponseDatum(kind="exact", value=float(value))
    if kind == "right":
        return ResponseDatum(kind="right", lower=float(value), upper=math.inf)
    if kind == "left":
        lo = 0.0 if positive else -math.inf
        return ResponseDatum(kind="left", lower=lo, upper=float(value))
    if kind == "interval":
        lo, hi = value
        lo = -math.inf if lo is None else float(lo)
        hi = math.inf if hi is None else float(hi)
        return ResponseDatum(kind="interval", lower=lo, upper=hi)
    if kind == "ordinal":
        if levels is None:
            raise DataError("ordinal encoding needs the ordered level list")
        lev = list(levels)
        try:
            k = lev.index(value) + 1
        except ValueError:
            raise DataError(f"response level {value!r} not among levels") from None
        return ResponseDatum(kind="ordinal", lower=float(k - 1), upper=float(k))
    if kind == "count":
        n = float(value)
        if not (n >= 0 and float(n).is_integer()):
            raise DataError(f"count response must be a nonnegative integer, got {value!r}")
        return ResponseDatum(kind="count", lower=n - 1.0, upper=n)
    raise DataError(f"unknown response kind {kind!r}")


@dataclass(frozen=True)
class Factor:
    """Grouping of expanded contrast columns back to one categorical."""

    name: str
    levels: tuple[str, ...]
    columns: tuple[str, ...]  # contrast column names, one per non-baseline level
    ordered: bool = False
    codes: np.ndarray | None = None  # per-row level index, 0-based


@dataclass(frozen=True)
class Dataset:
    """Encoded responses plus a numeric covariate matrix.

    ``x`` has one named column per numeric covariate or contrast; ``factors``
    maps each original categorical to its contrast columns and per-row codes.
    ``stratum`` optionally assigns each row to a group with its own
    transformation function.
    """

    responses: tuple[ResponseDatum, ...]
    x: np.ndarray
    colnames: tuple[str, ...]
    weights: np.ndarray | None = None
    stratum: np.ndarray | None = None
    stratum_labels: tuple[str, ...] | None = None
    factors: dict[str, Factor] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.responses)
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            x = x.reshape(n, -1)
        object.__setattr__(self, "x", x)
        if x.shape[0] != n:
            raise DataError(f"{n} responses but {x.shape[0]} covariate rows")
        if x.shape[1] != len(self.colnames):
            raise DataError("colnames do not match the covariate matrix")
        if not np.all(np.isfinite(x)):
            raise DataError("covariates must be finite (no NaN or inf)")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise DataError("weights must be nonnegative finite, one per row")
            object.__setattr__(self, "weights", w)
        if self.stratum is not None:
            s = np.asarray(self.stratum, dtype=int)
            if s.shape != (n,):
                raise DataError("stratum must assign one group per row")
            object.__setattr__(self, "stratum", s)

    @property
    def n(self) -> int:
        return len(self.responses)

    @property
    def n_strata(self) -> int:
        if self.stratum is None:
            return 1
        return int(self.stratum.max()) + 1 if self.n else 0

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.colnames.index(name)
        except ValueError:
            raise DataError(f"no covariate column {name!r}") from None
        return self.x[:, j]

    def columns(self, names) -> np.ndarray:
        if len(names) == 0:
            return np.empty((self.n, 0))
        return np.column_stack([self.column(nm) for nm in names])

    def subset(self, idx) -> "Dataset":
        """Row subset (used by tree nodes); keeps factor metadata aligned."""
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        factors = {
            name: replace(
                f, codes=None if f.codes is None else f.codes[idx]
            )
            for name, f in self.factors.items()
        }
        return Dataset(
            responses=tuple(self.responses[i] for i in idx),
            x=self.x[idx],
            colnames=self.colnames,
            weights=None if self.weights is None else self.weights[idx],
            stratum=None if self.stratum is None else self.stratum[idx],
            stratum_labels=self.stratum_labels,
            factors=factors,
        )

    def tree_variables(self) -> list[str]:
        """Original variable names available for testing and splitting."""
        in_factor = {c for f in self.factors.values() for c in f.columns}
        out = [nm for nm in self.colnames if nm not in in_factor]
        out.extend(self.factors)
        return out


def make_dataset(
    responses,
    x=None,
    colnames=None,
    *,
    kind="exact",
    levels=None,
    positive=False,
    weights=None,
    stratum=None,
) -> Dataset:
    """Convenience constructor from raw response values and an array."""
    data = [encode_response(kind, v, levels=levels, positive=positive) for v in responses]
    n = len(data)
    if x is None:
        x = np.empty((n, 0))
        colnames = ()
    else:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if colnames is None:
            colnames = tuple(f"x{j + 1}" for j in range(x.shape[1]))
    stratum_idx = None
    stratum_labels = None
    if stratum is not None:
        labels, stratum_idx = np.unique(np.asarray(stratum), return_inverse=True)
        stratum_labels = tuple(str(v) for v in labels)
    return Dataset(
        responses=tuple(data),
        x=x,
        colnames=tuple(colnames),
        weights=None if weights is None else np.asarray(weights, dtype=float),
        stratum=stratum_idx,
        stratum_labels=stratum_labels,
    )


def _parse_endpoint(raw, default):
    """Endpoint from a CSV cell: empty, Inf, -Inf or a number."""
    if raw is None:
        return default
    if isinstance(raw, float) and math.isnan(raw):
        return default
    s = str(raw).strip()
    if s == "" or s.lower() == "nan":
        return default
    if s.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if s.lower() in ("-inf", "-infinity"):
        return -math.inf
    return float(s)


def dataset_from_frame(
    frame: pd.DataFrame,
    *,
    response=None,
    response_kind="exact",
    levels=None,
    covariates=None,
    weights=None,
    stratum=None,
    positive=False,
    extra_columns=None,
) -> Dataset:
    """Build a Dataset from a data frame.

    Response layout is either a single column (``response=name``) together
    with ``response_kind``, or a pair of interval columns
    ``response=(left_name, right_name)`` where empty cells and ``-Inf`` /
    ``Inf`` mark unbounded ends.  String covariates become treatment
    contrasts with the first occurring level as baseline.

    ``extra_columns`` maps new column names to ready-made numeric arrays
    (engineered features); they are appended after the frame's covariates.
    """
    frame = frame.reset_index(drop=True)
    n = len(frame)

    if response is None:
        raise DataError("a response column (or pair of columns) is required")
    if isinstance(response, (tuple, list)):
        lname, rname = response
        for nm in (lname, rname):
            if nm not in frame.columns:
                raise DataError(f"response column {nm!r} not in data")
        data = []
        for lo_raw, hi_raw in zip(frame[lname], frame[rname]):
            lo = _parse_endpoint(lo_raw, -math.inf)
            hi = _parse_endpoint(hi_raw, math.inf)
            if lo == hi and math.isfinite(lo):
                data.append(ResponseDatum(kind="exact", value=lo))
            else:
                data.append(encode_response("interval", (lo, hi)))
        used = {lname, rname}
    else:
        if response not in frame.columns:
            raise DataError(f"response column {response!r} not in data")
        col = frame[response]
        if response_kind == "ordinal" and levels is None:
            levels = [str(v) for v in pd.unique(col)]
        raw = col if response_kind == "ordinal" else pd.to_numeric(col, errors="coerce")
        if response_kind != "ordinal" and raw.isna().any():
            bad = int(raw.isna().idxmax())
            raise DataError(f"non-numeric response in row {bad}")
        vals = [str(v) for v in col] if response_kind == "ordinal" else raw.to_numpy()
        data = [
            encode_response(response_kind, v, levels=levels, positive=positive)
            for v in vals
        ]
        used = {response}

    if weights is not None:
        used.add(weights)
    if stratum is not None:
        used.add(stratum)

    if covariates is None:
        covariates = [c for c in frame.columns if c not in used]

    cols = []
    names = []
    factors = {}
    for name in covariates:
        if name not in frame.columns:
            raise DataError(f"covariate column {name!r} not in data")
        col = frame[name]
        if isinstance(col.dtype, pd.CategoricalDtype):
            codes = col.cat.codes.to_numpy()
            if np.any(codes < 0):
                raise DataError(f"factor column {name!r} has missing values")
            lev = [str(v) for v in col.cat.categories]
            ordered = bool(col.cat.ordered)
        else:
            numeric = pd.to_numeric(col, errors="coerce")
            if not numeric.isna().any():
                cols.append(numeric.to_numpy(dtype=float))
                names.append(name)
                continue
            # treat as categorical: contrasts against the first occurring level
            values = col.astype(str)
            lev = list(pd.unique(values))
            codes = values.map({v: i for i, v in enumerate(lev)}).to_numpy()
            ordered = False
        contrast_names = []
        for i, v in enumerate(lev[1:], start=1):
            cols.append((codes == i).astype(float))
            cname = f"{name}={v}"
            names.append(cname)
            contrast_names.append(cname)
        factors[name] = Factor(
            name=name,
            levels=tuple(lev),
            columns=tuple(contrast_names),
            ordered=ordered,
            codes=codes,
        )

    if extra_columns:
        for cname, arr in extra_columns.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (n,):
                raise DataError(f"engineered column {cname!r} has wrong length")
            cols.append(arr)
            names.append(cname)

    x = np.column_stack(cols) if cols else np.empty((n, 0))

    w = None
    if weights is not None:
        w = pd.to_numeric(frame[weights], errors="coerce").to_numpy(dtype=float)

    stratum_idx = None
    stratum_labels = None
    if stratum is not None:
        labels, stratum_idx = np.unique(frame[stratum].astype(str), return_inverse=True)
        stratum_labels = tuple(labels)

    return Dataset(
        responses=tuple(data),
        x=x,
        colnames=tuple(names),
        weights=w,
        stratum=stratum_idx,
        stratum_labels=stratum_labels,
        factors=factors,
    )


def read_csv(path, **kwargs) -> Dataset:
    """dataset_from_frame() applied to a CSV file."""
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return dataset_from_frame(frame, **kwargs)


def validate_dataset(dataset: Dataset, basis=None) -> list[str]:
    """Collect diagnostics; an empty list means the data passed.

    With a basis given, responses are also checked against its support:
    exact values must lie inside, and every interval must overlap it.
    """
    issues = []
    if dataset.n == 0:
        issues.append("dataset has no rows")
    if basis is not None:
        lo, hi = basis.finite_range()
        for i, r in enumerate(dataset.responses):
            if r.is_exact:
                v = math.floor(r.value) if basis.count_floor else r.value
                if basis.is_discrete:
                    continue  # discrete bases reject exact rows at fit time
                if not (lo <= v <= hi):
                    issues.append(
                        f"row {i}: exact response {r.value} outside support [{lo}, {hi}]"
                    )
            else:
                r_lo = r.lower
                r_hi = r.upper
                if basis.count_floor:
                    r_lo = math.floor(r_lo) if math.isfinite(r_lo) else r_lo
                    r_hi = math.floor(r_hi) if math.isfinite(r_hi) else r_hi
                if r_hi < lo or r_lo > hi:
                    issues.append(
                        f"row {i}: interval ({r.lower}, {r.upper}] does not "
                        f"overlap support [{lo}, {hi}]"
                    )
        if basis.kind == "ordinal":
            k = basis.n_levels
            for i, r in enumerate(dataset.responses):
                if r.kind == "ordinal" and r.upper > k:
                    issues.append(f"row {i}: category {r.upper} exceeds {k} levels")
    if dataset.weights is not None and np.all(dataset.weights == 0):
        issues.append("all weights are zero")
    return issues
