"""Command line interface: simulate, fit, path, benchmark."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import PpselectError
from .geometry import ModelSpec, Window
from .harness import (
    PRESET_MU,
    WINDOW_PRESETS,
    StudyConfig,
    build_model,
    config_from_file,
    run_study,
    true_coefficients,
    write_records_csv,
    write_summary_csv,
    write_timing_csv,
)
from .io import _fmt, read_pattern, read_raster, write_csv, write_pattern
from .likelihood import mle
from .quadrature import build_scheme
from .simulate import RngSpec, sim_poisson, sim_thomas
from .tuning import GridSpec, adaptive_weights, select_lambda
from .lasso import fit_al
from .dantzig import fit_alds


def _parse_window(text: str) -> Window:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise PpselectError("--window needs x_min,x_max,y_min,y_max")
    return Window(*parts)


def _parse_quad(text: str):
    try:
        nx, ny = text.lower().split("x")
        return int(nx), int(ny)
    except ValueError:
        raise PpselectError("--quad must look like 64x64") from None


def _parse_truth(text: str):
    out = []
    for part in text.split(","):
        idx, value = part.split(":")
        out.append((int(idx), float(value)))
    return tuple(out)


def _add_sim_args(sub):
    sub.add_argument("--process", choices=["poisson", "thomas"],
                     default="poisson")
    sub.add_argument("--domain", choices=sorted(WINDOW_PRESETS),
                     help="named window preset")
    sub.add_argument("--window", help="x_min,x_max,y_min,y_max")
    sub.add_argument("--mu", type=float, help="target expected count")
    sub.add_argument("--p", type=int, default=20,
                     help="total design columns including the intercept")
    sub.add_argument("--truth", default="1:1,2:-1",
                     help="nonzero coefficients as index:value,...")
    sub.add_argument("--kappa", type=float, default=4e-4)
    sub.add_argument("--gamma", type=float, default=15.0)
    sub.add_argument("--seed", type=int, default=1)
    sub.add_argument("--n-fields", type=int, default=15)


def _sim_window_mu(args):
    if args.window:
        window = _parse_window(args.window)
        if args.mu is None:
            raise PpselectError("--mu is required with an explicit --window")
        return window, args.mu
    name = args.domain or "large"
    return WINDOW_PRESETS[name], (args.mu if args.mu is not None
                                  else PRESET_MU[name])


def cmd_simulate(args) -> int:
    window, mu = _sim_window_mu(args)
    config = StudyConfig(
        process=args.process, window=window, mu=mu, p=args.p,
        truth=_parse_truth(args.truth), kappa=args.kappa,
        gamma=args.gamma, seed=args.seed, n_fields=args.n_fields,
    )
    spec, fields = build_model(window, args.p, n_fields=args.n_fields,
                               standardize=False)
    beta = true_coefficients(config, spec, fields)
    rng = RngSpec(args.seed).child(0)
    if args.process == "poisson":
        pattern = sim_poisson(window, spec, fields, beta, rng)
    else:
        pattern = sim_thomas(window, spec, fields, beta,
                             args.kappa, args.gamma, rng)
    meta = {"process": args.process, "seed": args.seed, "mu": mu, "p": args.p}
    if args.process == "thomas":
        meta.update(kappa=args.kappa, gamma=args.gamma)
    write_pattern(pattern, args.out, metadata=meta)
    print(f"wrote {pattern.n} points to {args.out}")
    return 0


def _add_fit_inputs(sub):
    sub.add_argument("--pattern", required=True, help="pattern CSV file")
    sub.add_argument("--covariate", action="append", default=[],
                     metavar="NAME=RASTER",
                     help="raster covariate (repeatable)")
    sub.add_argument("--interaction", action="append", default=[],
                     metavar="A:B", help="product column (repeatable)")
    sub.add_argument("--no-intercept", action="store_true")
    sub.add_argument("--no-standardize", action="store_true")
    sub.add_argument("--quad", help="dummy grid, e.g. 64x64")
    sub.add_argument("--nu", type=float, default=1.0)
    sub.add_argument("--grid", default="50:1e-4",
                     help="path grid as N:MIN_RATIO")
    sub.add_argument("--out", help="output file prefix (default: stdout)")


def _load_scheme(args):
    pattern = read_pattern(args.pattern)
    fields = {}
    names = []
    for item in args.covariate:
        if "=" not in item:
            raise PpselectError(f"--covariate wants NAME=RASTER, got {item!r}")
        name, path = item.split("=", 1)
        fields[name] = read_raster(path, name=name)
        names.append(name)
    if not names:
        raise PpselectError("at least one --covariate is required")
    pairs = []
    for item in args.interaction:
        a, _, b = item.partition(":")
        if not b:
            raise PpselectError(f"--interaction wants A:B, got {item!r}")
        pairs.append((a, b))
    spec = ModelSpec(
        covariates=tuple(names), interactions=tuple(pairs),
        include_intercept=not args.no_intercept,
        standardize=not args.no_standardize,
    )
    n_x = n_y = None
    if args.quad:
        n_x, n_y = _parse_quad(args.quad)
    return build_scheme(pattern, spec, fields, n_x=n_x, n_y=n_y)


def _parse_grid(text: str) -> GridSpec:
    try:
        n, ratio = text.split(":")
        return GridSpec(n=int(n), min_ratio=float(ratio))
    except ValueError:
        raise PpselectError("--grid must look like 50:1e-4") from None


def _coefficient_table(fit):
    beta_orig = fit.beta_original()
    return [
        ("column", list(fit.names)),
        ("beta", list(fit.beta)),
        ("beta_original", list(beta_orig)),
        ("selected", [int(j in fit.support) for j in range(len(fit.names))]),
    ]


def _emit_fit(fit, args, extra=None):
    table = _coefficient_table(fit)
    diag = {
        "method": fit.method,
        "loglik": fit.loglik,
        "objective": fit.objective,
        "n_outer": fit.n_outer,
        "n_inner": fit.n_inner,
        "kkt_residual": fit.kkt_residual,
        "n_nonzero": fit.n_nonzero,
        "suspect": fit.suspect,
    }
    if fit.lam is not None:
        diag["lambda"] = fit.lam
    diag.update(extra or {})
    if args.out:
        tag = ("_" + fit.method.lower()
               if getattr(args, "method", None) == "both" else "")
        path = f"{args.out}{tag}_coefficients.csv"
        write_csv(table, path)
        print(json.dumps(diag, sort_keys=True))
        print(f"wrote {path}")
    else:
        names, columns = zip(*table)
        print(",".join(names))
        for row in zip(*columns):
            print(",".join(_fmt(v) for v in row))
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
    return 0


def cmd_fit(args) -> int:
    scheme = _load_scheme(args)
    if args.method == "mle":
        return _emit_fit(mle(scheme), args)
    if args.lam is not None:
        pilot = mle(scheme).beta
        unpen = scheme.spec.intercept_index
        weights = adaptive_weights(pilot, args.lam, args.nu, unpen)
        if args.method in ("al", "both"):
            fit = fit_al(scheme, weights)
            code = _emit_fit(fit, args, {"lambda": args.lam})
        if args.method in ("alds", "both"):
            fit = fit_alds(scheme, weights, pilot)
            code = _emit_fit(fit, args, {"lambda": args.lam})
        return code
    grid = _parse_grid(args.grid)
    code = 0
    for method in (["al", "alds"] if args.method == "both" else [args.method]):
        path = select_lambda(scheme, method=method, nu=args.nu, grid=grid)
        code = _emit_fit(path.selected, args,
                         {"selected_lambda": path.selected_lambda,
                          "bic": float(path.bics[path.selected_index])})
    return code


def cmd_path(args) -> int:
    scheme = _load_scheme(args)
    grid = _parse_grid(args.grid)
    path = select_lambda(scheme, method=args.method, nu=args.nu, grid=grid)
    cols = [
        ("lambda", list(path.lambdas)),
        ("bic", list(path.bics)),
        ("selected", [int(i == path.selected_index)
                      for i in range(len(path.lambdas))]),
        ("n_nonzero", [f.n_nonzero if f else "" for f in path.fits]),
        ("kkt_residual", [f.kkt_residual if f else "" for f in path.fits]),
        ("error", [path.errors.get(i, "") for i in range(len(path.lambdas))]),
    ]
    for j, name in enumerate(scheme.spec.column_names):
        cols.append((f"beta_{name}",
                     [f.beta[j] if f else "" for f in path.fits]))
    if args.out:
        write_csv(cols, args.out)
        print(f"wrote {args.out}")
    else:
        names, columns = zip(*cols)
        print(",".join(names))
        for row in zip(*columns):
            print(",".join(_fmt(v) for v in row))
    return 0


def cmd_benchmark(args) -> int:
    config = config_from_file(args.config)
    if args.workers is not None:
        config = StudyConfig(**{**config.__dict__, "workers": args.workers})
    if args.seed is not None:
        config = StudyConfig(**{**config.__dict__, "seed": args.seed})
    result = run_study(config)
    write_summary_csv(result, f"{args.out}_summary.csv")
    write_records_csv(result, f"{args.out}_replicates.csv")
    write_timing_csv(result, f"{args.out}_timing.csv")
    for method, agg in result.aggregates.items():
        print(f"{method}: tpr={agg['tpr']:.1f} fpr={agg['fpr']:.1f} "
              f"rmse={agg['rmse']:.3f} failed={agg['n_failed']}")
    print(f"wrote {args.out}_summary.csv, {args.out}_replicates.csv, "
          f"{args.out}_timing.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppselect",
        description="Sparse log-linear intensity models for point patterns",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="draw a synthetic pattern")
    _add_sim_args(p_sim)
    p_sim.add_argument("--out", required=True, help="pattern CSV to write")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit one model to a pattern")
    _add_fit_inputs(p_fit)
    p_fit.add_argument("--method", choices=["mle", "al", "alds", "both"],
                       default="al")
    p_fit.add_argument("--lam", type=float,
                       help="fixed penalty level (default: tune by BIC)")
    p_fit.set_defaults(func=cmd_fit)

    p_path = sub.add_parser("path", help="trace the whole tuning path")
    _add_fit_inputs(p_path)
    p_path.add_argument("--method", choices=["al", "alds"], default="al")
    p_path.set_defaults(func=cmd_path)

    p_bench = sub.add_parser("benchmark", help="run a selection study")
    p_bench.add_argument("--config", required=True, help="key=value file")
    p_bench.add_argument("--out", required=True, help="output file prefix")
    p_bench.add_argument("--workers", type=int)
    p_bench.add_argument("--seed", type=int)
    p_bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PpselectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
