"""Command-line front end: CSV matrix I/O, subcommands for fitting, tuning,
simulation benchmarks, the application reductions and diagnostics, with
machine-readable JSON results.

Exit codes: 0 success, 2 usage/data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .baselines_apps import (
    bicluster,
    sparse_factor_analysis,
    sparse_pca_approx,
    sparse_pca_regression,
    sparse_var,
)
from .bench import METHODS, run_benchmark
from .lasso_init import initialize
from .linalg import check_matrix
from .metrics_theory import perturbation_check, rate_diagnostic, robust_spark_bruteforce
from .penalty import Penalty, PenaltyKind, adaptive_weights
from .simgen import ModelSpec, rng_stream
from .solver import SofarConfig, SofarDivergedError, SofarFit, fit
from .tuning import Criterion, search

__all__ = ["read_matrix_csv", "write_matrix_csv", "run", "main"]


class CliDataError(Exception):
    """Bad input data (parse failure, dimension mismatch); maps to exit 2."""


def read_matrix_csv(path: str, has_header: bool = False) -> np.ndarray:
    """Read a comma-separated numeric matrix; strict about shape and tokens.

    Rejects ragged rows, non-numeric cells and NaN/Inf tokens, naming the
    offending line. Parsing is locale-independent (C float syntax only).
    """
    rows: list[list[float]] = []
    width = None
    try:
        handle = open(path, encoding="ascii")
    except OSError as exc:
        raise CliDataError(f"cannot open {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if lineno == 1 and has_header:
                continue
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise CliDataError(
                    f"{path}: line {lineno} has {len(cells)} cells, expected {width}"
                )
            parsed = []
            for cell in cells:
                try:
                    val = float(cell)
                except ValueError as exc:
                    raise CliDataError(
                        f"{path}: line {lineno}: non-numeric cell {cell.strip()!r}"
                    ) from exc
                if not np.isfinite(val):
                    raise CliDataError(f"{path}: line {lineno}: non-finite cell {cell.strip()!r}")
                parsed.append(val)
            rows.append(parsed)
    if not rows:
        raise CliDataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def write_matrix_csv(path: str, m: np.ndarray) -> None:
    """Write a matrix with 17 significant digits (lossless float round-trip)."""
    a = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w", encoding="ascii") as handle:
        for row in a:
            handle.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    if isinstance(obj, Criterion):
        return obj.value
    return obj


def _emit(result: dict, out: str | None) -> None:
    payload = json.dumps(_jsonable(result), indent=2, sort_keys=True)
    if out:
        with open(out, "w", encoding="ascii") as handle:
            handle.write(payload + "\n")
    else:
        sys.stdout.write(payload + "\n")


def _fit_payload(f: SofarFit, factors_dir: str | None, stem: str) -> dict:
    """Factorization block: inline arrays or CSV-path references."""
    base = {
        "rank": f.rank,
        "d": f.d.tolist(),
        "converged": f.converged,
        "outer_iterations": f.outer_iterations,
        "monotone_violations": f.monotone_violations,
        "max_orth_dev": f.max_orth_dev,
    }
    if factors_dir:
        os.makedirs(factors_dir, exist_ok=True)
        u_path = os.path.join(factors_dir, f"{stem}_u.csv")
        v_path = os.path.join(factors_dir, f"{stem}_v.csv")
        write_matrix_csv(u_path, f.u)
        write_matrix_csv(v_path, f.v)
        base["u_csv"] = u_path
        base["v_csv"] = v_path
    else:
        base["u"] = f.u.tolist()
        base["v"] = f.v.tolist()
    return base


def _penalty_kind(name: str) -> PenaltyKind:
    return PenaltyKind.ENTRYWISE_L1 if name == "l1" else PenaltyKind.ROWWISE_GROUP


def _build_config(args, x, y, m, seed):
    """Solver config (and shared init) honoring the penalty/adaptive flags."""
    init = initialize(x, y, m, seed=seed)
    pa_kind = _penalty_kind(args.penalty_a)
    pb_kind = _penalty_kind(args.penalty_b)
    if args.adaptive and not init.zero_fit:
        a0 = init.u0 * init.d0
        b0 = init.v0 * init.d0
        pa = Penalty(pa_kind, adaptive_weights(a0, rowwise=pa_kind is PenaltyKind.ROWWISE_GROUP))
        pb = Penalty(pb_kind, adaptive_weights(b0, rowwise=pb_kind is PenaltyKind.ROWWISE_GROUP))
        wd = 1.0 / np.maximum(init.d0, 1e-8)
    else:
        pa = Penalty(pa_kind)
        pb = Penalty(pb_kind)
        wd = None
    cfg = SofarConfig(
        lambda_d=args.lambda_d,
        lambda_a=args.lambda_a,
        lambda_b=args.lambda_b,
        penalty_a=pa,
        penalty_b=pb,
        weights_d=wd,
        mu0=args.mu0,
        gamma=args.gamma,
        mu_max=args.mu_max,
        max_outer=args.max_outer,
    )
    return cfg, init


def _load_xy(args):
    x = read_matrix_csv(args.x)
    y = read_matrix_csv(args.y)
    if x.shape[0] != y.shape[0]:
        raise CliDataError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    return x, y


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("SOFAR_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _add_solver_flags(sp):
    sp.add_argument("--lambda-d", type=float, default=0.0, dest="lambda_d")
    sp.add_argument("--lambda-a", type=float, default=0.0, dest="lambda_a")
    sp.add_argument("--lambda-b", type=float, default=0.0, dest="lambda_b")
    sp.add_argument("--penalty-a", choices=("l1", "group"), default="l1", dest="penalty_a")
    sp.add_argument("--penalty-b", choices=("l1", "group"), default="l1", dest="penalty_b")
    sp.add_argument("--adaptive", action="store_true")
    sp.add_argument("--mu0", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=1.05)
    sp.add_argument("--mu-max", type=float, default=1e8, dest="mu_max")
    sp.add_argument("--max-outer", type=int, default=1000, dest="max_outer")


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--factors-dir", default=None, dest="factors_dir")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sofar", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("fit", help="single penalized fit at a fixed penalty triple")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--rank", type=int, required=True)
    _add_solver_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("tune", help="tune the penalty ray by gic, cv or validation")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--rank", type=int, required=True)
    sp.add_argument("--criterion", choices=("gic", "cv", "valid"), default="gic")
    sp.add_argument("--x-valid", default=None, dest="x_valid")
    sp.add_argument("--y-valid", default=None, dest="y_valid")
    sp.add_argument("--grid", type=int, default=30)
    sp.add_argument("--epsilon", type=float, default=1e-3)
    sp.add_argument("--k-folds", type=int, default=5, dest="k_folds")
    _add_solver_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("simulate", help="seeded benchmark replicates for one method")
    sp.add_argument("--model", type=int, required=True, choices=(1, 2, 3, 4, 5))
    sp.add_argument("--reps", type=int, required=True)
    sp.add_argument("--method", default="sofar-l", choices=METHODS)
    sp.add_argument("--rank", type=int, default=5)
    sp.add_argument("--grid", type=int, default=30)
    sp.add_argument("--n-valid", type=int, default=2000, dest="n_valid")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--q", type=int, default=None)
    _add_common(sp)

    for name in ("pca", "bicluster", "factor"):
        sp = sub.add_parser(name)
        sp.add_argument("--x", required=True)
        sp.add_argument("--rank", type=int, required=True)
        if name == "pca":
            sp.add_argument("--variant", choices=("regression", "approx"), default="regression")
        _add_solver_flags(sp)
        _add_common(sp)

    sp = sub.add_parser("var", help="two-step factor-augmented vector autoregression")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y-aug", required=True, dest="y_aug")
    sp.add_argument("--rank", type=int, required=True)
    _add_solver_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("diag", help="theory diagnostics")
    dsub = sp.add_subparsers(dest="diag_cmd", required=True)

    dp = dsub.add_parser("spark", help="brute-force robust spark")
    dp.add_argument("--x", required=True)
    dp.add_argument("--c", type=float, required=True)
    dp.add_argument("--k-max", type=int, required=True, dest="k_max")
    _add_common(dp)

    dp = dsub.add_parser("perturb", help="singular-value perturbation check on random pairs")
    dp.add_argument("--pairs", type=int, default=100)
    dp.add_argument("--p", type=int, default=12)
    dp.add_argument("--q", type=int, default=8)
    _add_common(dp)

    dp = dsub.add_parser("rate", help="error-rate scaling across sample sizes")
    dp.add_argument("--model", type=int, default=1, choices=(1, 2, 3, 4, 5))
    dp.add_argument("--p", type=int, default=40)
    dp.add_argument("--q", type=int, default=20)
    dp.add_argument("--n-values", default="200,400,800", dest="n_values")
    dp.add_argument("--reps", type=int, default=10)
    dp.add_argument("--rank", type=int, default=5)
    _add_common(dp)

    return parser


def _cmd_fit(args) -> dict:
    x, y = _load_xy(args)
    cfg, init = _build_config(args, x, y, args.rank, args.seed)
    f = fit(x, y, args.rank, cfg, init=init)
    return {
        "fit": _fit_payload(f, args.factors_dir, "fit"),
        "lambda0": init.lambda0,
    }


def _cmd_tune(args) -> dict:
    x, y = _load_xy(args)
    crit = Criterion(args.criterion)
    data = {}
    if crit is Criterion.VALIDATION:
        if not args.x_valid or not args.y_valid:
            raise CliDataError("validation criterion requires --x-valid and --y-valid")
        data = {
            "x_valid": read_matrix_csv(args.x_valid),
            "y_valid": read_matrix_csv(args.y_valid),
        }
    elif crit is Criterion.KFOLD_CV:
        data = {"k_folds": args.k_folds}
    cfg, init = _build_config(args, x, y, args.rank, args.seed)
    res = search(
        x,
        y,
        args.rank,
        cfg,
        grid_size=args.grid,
        epsilon=args.epsilon,
        criterion=crit,
        criterion_data=data,
        seed=args.seed,
        init=init,
    )
    return {
        "criterion": crit.value,
        "grid": res.grid,
        "scores": res.scores,
        "best_index": res.best_index,
        "best_lambdas": res.grid[res.best_index],
        "null_data_warning": res.null_data_warning,
        "fit": _fit_payload(res.best_fit, args.factors_dir, "tune"),
    }


def _cmd_simulate(args) -> dict:
    spec = ModelSpec.standard(args.model, n=args.n, p=args.p, q=args.q)
    res = run_benchmark(
        spec,
        args.method,
        args.reps,
        args.seed,
        m=args.rank,
        grid_size=args.grid,
        n_valid=args.n_valid,
        threads=_threads(args),
    )
    reps_out = [
        {"rep": r["rep"], **_jsonable(r["metrics"]), "monotone_violations": r["monotone_violations"]}
        for r in res["replicates"]
    ]
    return {
        "model": args.model,
        "method": args.method,
        "reps": args.reps,
        "dimensions": {"n": spec.n, "p": spec.p, "q": spec.q},
        "replicates": reps_out,
        "aggregate": res["aggregate"],
        "total_monotone_violations": res["total_monotone_violations"],
        "max_orth_dev": res["max_orth_dev"],
    }


def _cmd_app(args) -> dict:
    x = read_matrix_csv(args.x)
    cfg, _ = _build_config(args, np.eye(x.shape[0]), x, args.rank, args.seed)
    if args.cmd == "bicluster":
        res = bicluster(x, args.rank, cfg, seed=args.seed)
        derived = {
            "row_clusters": [idx.tolist() for idx in res.derived["row_clusters"]],
            "col_clusters": [idx.tolist() for idx in res.derived["col_clusters"]],
        }
    elif args.cmd == "factor":
        res = sparse_factor_analysis(x, args.rank, cfg, seed=args.seed)
        derived = {k: v.tolist() for k, v in res.derived.items()}
    elif args.variant == "regression":
        cfg, _ = _build_config(args, x, x, args.rank, args.seed)
        res = sparse_pca_regression(x, args.rank, cfg, seed=args.seed)
        derived = {k: v.tolist() for k, v in res.derived.items()}
    else:
        res = sparse_pca_approx(x, args.rank, cfg, seed=args.seed)
        derived = {k: v.tolist() for k, v in res.derived.items()}
    return {"fit": _fit_payload(res.fit, args.factors_dir, args.cmd), "derived": derived}


def _cmd_var(args) -> dict:
    xs = read_matrix_csv(args.x)
    ys = read_matrix_csv(args.y_aug)
    if xs.shape[0] != ys.shape[0]:
        raise CliDataError("x and y-aug must cover the same time points")
    cfg, _ = _build_config(args, xs[:-1], xs[1:], args.rank, args.seed)
    res = sparse_var(xs, ys, args.rank, cfg, seed=args.seed)
    derived = {
        "a_block": res.derived["a_block"].tolist(),
        "b_block": res.derived["b_block"].tolist(),
        "d_hat": res.derived["d_hat"].tolist(),
    }
    return {"fit": _fit_payload(res.fit, args.factors_dir, "var"), "derived": derived}


def _cmd_diag(args) -> dict:
    if args.diag_cmd == "spark":
        x = read_matrix_csv(args.x)
        spark = robust_spark_bruteforce(x, args.c, args.k_max)
        return {"diagnostic": "spark", "c": args.c, "k_max": args.k_max, "spark": spark}
    if args.diag_cmd == "perturb":
        rng = rng_stream(args.seed, 0)
        stars, deltas = [], []
        for _ in range(args.pairs):
            c_star = rng.normals((args.p, args.q))
            d1 = float(np.linalg.svd(c_star, compute_uv=False)[0])
            delta = rng.normals((args.p, args.q))
            spec2 = float(np.linalg.svd(delta, compute_uv=False)[0])
            delta *= 0.5 * d1 / spec2
            stars.append(c_star)
            deltas.append(delta)
        recs = perturbation_check(stars, deltas)
        ratios = [r.ab_ratio for r in recs]
        return {
            "diagnostic": "perturb",
            "pairs": args.pairs,
            "all_mirsky_hold": all(r.mirsky_holds for r in recs),
            "ab_ratio_max": max(ratios),
            "ab_ratio_median": float(np.median(ratios)),
        }
    spec = ModelSpec.standard(args.model, p=args.p, q=args.q)
    n_values = [int(v) for v in args.n_values.split(",")]
    table = rate_diagnostic(spec, n_values, args.reps, args.seed, m=args.rank)
    return {"diagnostic": "rate", "table": table}


def run(argv) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    handlers = {
        "fit": _cmd_fit,
        "tune": _cmd_tune,
        "simulate": _cmd_simulate,
        "pca": _cmd_app,
        "bicluster": _cmd_app,
        "factor": _cmd_app,
        "var": _cmd_var,
        "diag": _cmd_diag,
    }
    started = time.time()
    try:
        body = handlers[args.cmd](args)
    except (CliDataError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (SofarDivergedError, np.linalg.LinAlgError, FloatingPointError, AssertionError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 3
    result = {
        "command": args.cmd,
        "config": {
            k: _jsonable(v)
            for k, v in sorted(vars(args).items())
            if k not in ("cmd",) and not callable(v)
        },
        "seed": getattr(args, "seed", None),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        **body,
    }
    _emit(result, args.out)
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
