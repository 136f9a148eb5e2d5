"""Command-line interface.

Subcommands: ``fit``, ``predict``, ``select``, ``tree``, ``scoretest``,
``simulate``.  Model structure comes from a JSON or TOML config file;
data come from CSV.  Results go to ``--out`` as JSON (CSV for curves and
simulated data).  Exit codes: 0 success, 2 configuration problem, 3 data
problem, 4 estimation did not converge.

``--threads`` pins the BLAS thread pools, which requires setting the
environment before numpy loads; the heavy imports therefore happen
inside the command handlers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

SCHEMA_VERSION = 1

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class ConfigError(ValueError):
    """Raised for malformed or incomplete configuration."""


def _load_config(path: str) -> dict:
    if path is None:
        raise ConfigError("--config is required for this command")
    try:
        if path.endswith(".toml"):
            import tomllib

            with open(path, "rb") as fh:
                return tomllib.load(fh)
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except (json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f"could not parse config {path}: {exc}")


def _basis_from_config(cfg: dict):
    from .bases import BasisSpec

    if "basis" not in cfg:
        raise ConfigError("model config needs a 'basis' table")
    b = dict(cfg["basis"])
    kind = b.pop("kind", None)
    if kind is None:
        raise ConfigError("basis config needs 'kind'")
    kwargs = {}
    if "order" in b:
        kwargs["order"] = int(b.pop("order"))
    if "support" in b:
        lo, hi = b.pop("support")
        kwargs["support"] = (float(lo), float(hi))
    if "n_levels" in b:
        kwargs["n_levels"] = int(b.pop("n_levels"))
    if "values" in b:
        kwargs["values"] = tuple(float(v) for v in b.pop("values"))
    if "count_floor" in b:
        kwargs["count_floor"] = bool(b.pop("count_floor"))
    if "centered" in b:
        kwargs["centered"] = bool(b.pop("centered"))
    if b:
        raise ConfigError(f"unknown basis keys: {sorted(b)}")
    try:
        return BasisSpec(kind=kind, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _spec_from_config(config: dict):
    from .likelihood import ModelSpec

    model = config.get("model")
    if not isinstance(model, dict):
        raise ConfigError("config needs a 'model' table")
    basis = _basis_from_config(model)
    link = model.get("link", "probit")
    try:
        return ModelSpec(
            basis=basis,
            link=link,
            location=tuple(model.get("location", ())),
            scale=tuple(model.get("scale", ())),
            stratified=bool(model.get("stratified", False)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def _dataset_from_config(data_path: str, config: dict):
    from .data import read_csv

    if data_path is None:
        raise ConfigError("--data is required for this command")
    resp = config.get("response")
    if not isinstance(resp, dict):
        raise ConfigError("config needs a 'response' table")
    if "columns" in resp:
        response = tuple(resp["columns"])
    elif "column" in resp:
        response = resp["column"]
    else:
        raise ConfigError("response table needs 'column' or 'columns'")
    kwargs = dict(
        response=response,
        response_kind=resp.get("kind", "exact"),
        positive=bool(resp.get("positive", False)),
    )
    if resp.get("levels") is not None:
        kwargs["levels"] = tuple(resp["levels"])
    if config.get("covariates") is not None:
        kwargs["covariates"] = tuple(config["covariates"])
    if config.get("weights") is not None:
        kwargs["weights"] = config["weights"]
    if config.get("stratum") is not None:
        kwargs["stratum"] = config["stratum"]
    if not os.path.exists(data_path):
        from .data import DataError

        raise DataError(f"data file not found: {data_path}")
    return read_csv(data_path, **kwargs)


def _fit_options(config: dict):
    from .fitter import FitOptions

    section = config.get("fit", {})
    known = {"optimizer", "grad_tol", "max_iter"}
    extra = set(section) - known
    if extra:
        raise ConfigError(f"unknown fit keys: {sorted(extra)}")
    kwargs = {}
    if "optimizer" in section:
        kwargs["optimizer"] = section["optimizer"]
    if "grad_tol" in section:
        kwargs["grad_tol"] = float(section["grad_tol"])
    if "max_iter" in section:
        kwargs["max_iter"] = int(section["max_iter"])
    return FitOptions(**kwargs)


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=False, default=float)
    if path is None:
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _fit_payload(result):
    names = list(result.param_names)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "loglik": result.loglik,
        "converged": bool(result.converged),
        "n_obs": result.n_obs,
        "n_iter": result.n_iter,
        "grad_norm": result.grad_norm,
        "flags": list(result.flags),
        "coefficients": {nm: float(v) for nm, v in zip(names, result.layout.pack(result.params))},
    }
    if result.vcov is not None:
        import numpy as np

        se = np.sqrt(np.clip(np.diag(result.vcov), 0.0, None))
        payload["stderr"] = {nm: float(s) for nm, s in zip(names, se)}
    return payload


def _cmd_fit(args):
    from .fitter import fit

    config = _load_config(args.config)
    spec = _spec_from_config(config)
    dataset = _dataset_from_config(args.data, config)
    result = fit(dataset, spec, _fit_options(config))
    _write_json(args.out, _fit_payload(result))
    return 0 if result.converged else 4


def _cmd_predict(args):
    import csv

    from .fitter import fit
    from .inference import CurveRequest, predict_curve

    config = _load_config(args.config)
    spec = _spec_from_config(config)
    dataset = _dataset_from_config(args.data, config)
    section = config.get("predict")
    if not isinstance(section, dict):
        raise ConfigError("config needs a 'predict' table")
    target = section.get("target", "distribution")
    x = section.get("x", {})
    if not isinstance(x, dict):
        raise ConfigError("'predict.x' must map covariate names to values")
    kwargs = {"target": target, "x": dict(x)}
    if target == "quantile":
        probs = section.get("probs")
        if probs is None:
            raise ConfigError("quantile prediction needs 'predict.probs'")
        kwargs["probs"] = [float(p) for p in probs]
    else:
        grid = section.get("grid")
        if grid is None:
            raise ConfigError("prediction needs 'predict.grid'")
        import numpy as np

        if isinstance(grid, dict):
            missing = {"from", "to"} - set(grid)
            if missing:
                raise ConfigError(f"'predict.grid' table needs {sorted(missing)}")
            kwargs["grid"] = np.linspace(
                float(grid["from"]), float(grid["to"]), int(grid.get("length", 101))
            )
        elif isinstance(grid, (list, tuple)):
            kwargs["grid"] = np.asarray([float(v) for v in grid])
        else:
            raise ConfigError(
                "'predict.grid' must be a list of points or a from/to table"
            )
    if section.get("stratum") is not None:
        kwargs["stratum"] = section["stratum"]

    result = fit(dataset, spec, _fit_options(config))
    request = CurveRequest(**kwargs)
    values = predict_curve(result, request)
    axis = request.probs if target == "quantile" else request.grid
    rows = zip(axis, values)
    header = ("prob", "quantile") if target == "quantile" else ("y", target)
    if args.out is None:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    return 0 if result.converged else 4


def _cmd_select(args):
    from .subset import SelectOptions, select

    config = _load_config(args.config)
    spec = _spec_from_config(config)
    dataset = _dataset_from_config(args.data, config)
    section = config.get("select", {})
    known = {"s_max", "k_max", "tau_scale", "mandatory"}
    extra = set(section) - known
    if extra:
        raise ConfigError(f"unknown select keys: {sorted(extra)}")
    opts = SelectOptions(
        s_max=section.get("s_max"),
        k_max=section.get("k_max"),
        tau_scale=float(section.get("tau_scale", 0.01)),
        mandatory=tuple(section.get("mandatory", ())),
    )
    path = select(dataset, spec, opts)
    sel = path.selected
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "select",
        "candidates": list(path.candidates),
        "selected": {
            "support_size": sel.s,
            "active": list(sel.active),
            "loglik": sel.loglik,
            "sic": sel.sic,
        },
        "path": [
            {
                "support_size": e.s,
                "active": list(e.active),
                "loglik": e.loglik,
                "sic": e.sic,
                "converged": bool(e.converged),
            }
            for e in path.entries
        ],
    }
    _write_json(args.out, payload)
    return 0 if all(e.converged for e in path.entries) else 4


def _cmd_tree(args):
    from .tree import TreeOptions, grow_tree

    config = _load_config(args.config)
    spec = _spec_from_config(config)
    dataset = _dataset_from_config(args.data, config)
    section = config.get("tree", {})
    known = {"alpha", "min_node_size", "max_depth", "variables"}
    extra = set(section) - known
    if extra:
        raise ConfigError(f"unknown tree keys: {sorted(extra)}")
    B = args.B if args.B is not None else 0
    if B > 0 and args.seed is None:
        raise ConfigError("--seed is required when tree tests use permutations (--B > 0)")
    opts = TreeOptions(
        alpha=float(section.get("alpha", 0.05)),
        min_node_size=int(section.get("min_node_size", 20)),
        max_depth=section.get("max_depth"),
        B=B,
        seed=args.seed if args.seed is not None else 0,
        variables=tuple(section["variables"]) if section.get("variables") else None,
    )
    tree = grow_tree(dataset, spec, opts)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "tree",
        "n_leaves": len(tree.leaves()),
        "tree": tree.to_dict(),
    }
    _write_json(args.out, payload)
    if args.out is not None:
        print(tree.render())
    return 0


def _cmd_scoretest(args):
    from .inference import score_test

    config = _load_config(args.config)
    spec = _spec_from_config(config)
    dataset = _dataset_from_config(args.data, config)
    section = config.get("scoretest", {})
    known = {"groups", "exhaustive"}
    extra = set(section) - known
    if extra:
        raise ConfigError(f"unknown scoretest keys: {sorted(extra)}")
    groups = section.get("groups")
    if not groups:
        raise ConfigError("scoretest config needs 'groups' (covariate names)")
    B = args.B if args.B is not None else 9999
    exhaustive = bool(section.get("exhaustive", False))
    if B > 0 and not exhaustive and args.seed is None:
        raise ConfigError("--seed is required for Monte-Carlo permutation tests")
    st = score_test(
        dataset,
        spec,
        list(groups),
        B=B,
        seed=args.seed if args.seed is not None else 0,
        exhaustive=exhaustive,
    )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "scoretest",
        "labels": list(st.labels),
        "statistic": [float(v) for v in st.statistic.ravel()],
        "max_stat": st.max_stat,
        "quad_stat": st.quad_stat,
        "quad_df": st.quad_df,
        "p_max": st.p_max,
        "p_quad": st.p_quad,
        "p_max_perm": st.p_max_perm,
        "p_quad_perm": st.p_quad_perm,
        "n_perm": st.n_perm,
        "exhaustive": bool(st.exhaustive),
        "flags": list(st.flags),
    }
    _write_json(args.out, payload)
    return 0


def _cmd_simulate(args):
    import csv

    config = _load_config(args.config)
    section = config.get("simulate")
    if not isinstance(section, dict):
        raise ConfigError("config needs a 'simulate' table")
    known = {"n", "beta", "gamma", "delta_location", "delta_scale", "n_noise", "design", "replicate"}
    extra = set(section) - known
    if extra:
        raise ConfigError(f"unknown simulate keys: {sorted(extra)}")
    if args.seed is None:
        raise ConfigError("--seed is required for simulation")
    design = section.get("design", "smooth")
    n = int(section.get("n", 500))
    common = dict(
        n_noise=int(section.get("n_noise", 0)),
        seed=args.seed,
        replicate=int(section.get("replicate", 0)),
    )
    from .simulate import chi2_sample, chi2_step_sample

    if design == "smooth":
        dataset = chi2_sample(
            n,
            beta=float(section.get("beta", 0.0)),
            gamma=float(section.get("gamma", 0.0)),
            **common,
        )
    elif design == "step":
        dataset = chi2_step_sample(
            n,
            delta_location=float(section.get("delta_location", 0.0)),
            delta_scale=float(section.get("delta_scale", 0.0)),
            **common,
        )
    else:
        raise ConfigError(f"unknown simulate design: {design!r}")

    header = ["y", *dataset.colnames]
    rows = (
        [dataset.responses[i].value, *dataset.x[i]] for i in range(dataset.n)
    )
    if args.out is None:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "select": _cmd_select,
    "tree": _cmd_tree,
    "scoretest": _cmd_scoretest,
    "simulate": _cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locscale",
        description="Location-scale transformation models: estimation, "
        "prediction, subset selection, trees, and permutation score tests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("fit", "estimate a model and report coefficients"),
        ("predict", "evaluate a predictive curve on a grid"),
        ("select", "best-subset search over location and scale terms"),
        ("tree", "grow a score-residual partition tree"),
        ("scoretest", "permutation score test for covariate association"),
        ("simulate", "draw a synthetic dataset"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--data", help="CSV file with the observations")
        p.add_argument("--config", help="JSON or TOML model configuration")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, help="random seed for stochastic commands")
        p.add_argument("--threads", type=int, help="pin BLAS/OpenMP thread count")
        p.add_argument("--B", type=int, help="number of permutation draws")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return 2
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .bases import BasisError
    from .data import DataError

    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, BasisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
