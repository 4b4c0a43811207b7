"""Selection-study harness: configs, replicates, metrics, reports.

A study simulates patterns from a known sparse truth, runs the tuned
penalized fits on each replicate, and aggregates support-recovery and
accuracy metrics.  Per-replicate randomness is keyed only by
(seed, replicate index), and aggregate rows are recomputable from the
persisted per-replicate records, so results are identical whatever
the worker count.  Wall-clock timings are inherently run-dependent
and go to a separate timing table, never into the deterministic ones.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PpselectError
from .geometry import CovariateField, ModelSpec, Window
from .io import write_csv
from .likelihood import mle
from .quadrature import build_scheme
from .simulate import RngSpec, sim_poisson, sim_thomas, tune_intercept
from .tuning import GridSpec, select_lambda

#: fixed seed for the bundled synthetic covariate surfaces
FIELD_SEED = 127

#: named window presets (extent only; any explicit window also works)
WINDOW_PRESETS = {
    "small": Window(0.0, 250.0, 0.0, 125.0),
    "medium": Window(0.0, 500.0, 0.0, 250.0),
    "large": Window(0.0, 1000.0, 0.0, 500.0),
}

#: default target counts paired with the presets above
PRESET_MU = {"small": 150.0, "medium": 600.0, "large": 2400.0}


def tpr_fpr(selected, truth, p: int, intercept_index: int | None = 0):
    """Percent true/false positive rates of a selected support.

    Supports are 0-based design column indices; the intercept column
    is stripped from both sets and from the denominator, so with p
    total columns the noise pool has p - 1 - len(truth) members.
    """
    truth = {int(j) for j in truth}
    selected = {int(j) for j in selected}
    if intercept_index is not None:
        truth.discard(intercept_index)
        selected.discard(intercept_index)
    if not truth:
        raise ValueError("the true support must be nonempty")
    valid = set(range(p))
    if not (truth <= valid and selected <= valid):
        raise ValueError("support indices must lie in [0, p)")
    n_noise = p - (0 if intercept_index is None else 1) - len(truth)
    if n_noise <= 0:
        raise ValueError("no noise coefficients: FPR is undefined")
    tpr = 100.0 * len(selected & truth) / len(truth)
    fpr = 100.0 * len(selected - truth) / n_noise
    return tpr, fpr


def rmse(estimates, truth, intercept_index: int | None = 0) -> float:
    """Root of the summed per-coefficient mean squared errors.

    ``estimates`` has one row per replicate; the intercept column is
    excluded from the sum.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.asarray(truth, dtype=float)
    if est.shape[1] != truth.size:
        raise ValueError("estimate rows and truth have different lengths")
    sq = np.mean((est - truth) ** 2, axis=0)
    if intercept_index is not None:
        sq = np.delete(sq, intercept_index)
    return float(np.sqrt(np.sum(sq)))


def make_fields(window: Window, n_fields: int, seed: int = FIELD_SEED,
                n_cols: int = 50, n_rows: int = 25) -> dict:
    """Synthetic smooth covariate rasters over the window.

    Each surface is a sum of Gaussian bumps whose centers and widths
    are drawn in window-relative coordinates, so the same seed gives
    the same surface rescaled onto any window.  Cell values are
    normalized to zero mean and unit variance.
    """
    fields = {}
    width = window.x_max - window.x_min
    height = window.y_max - window.y_min
    dx, dy = width / n_cols, height / n_rows
    cx = (np.arange(n_cols) + 0.5) / n_cols
    cy = (np.arange(n_rows) + 0.5) / n_rows
    gx, gy = np.meshgrid(cx, cy)
    for i in range(n_fields):
        gen = RngSpec(seed, (i,)).generator()
        n_bumps = int(gen.integers(6, 13))
        centers = gen.uniform(0.0, 1.0, (n_bumps, 2))
        widths = gen.uniform(0.08, 0.35, n_bumps)
        amps = gen.uniform(0.5, 1.5, n_bumps) * gen.choice([-1.0, 1.0], n_bumps)
        vals = np.zeros_like(gx)
        for (ux, uy), s, a in zip(centers, widths, amps):
            vals += a * np.exp(-((gx - ux) ** 2 + (gy - uy) ** 2) / (2 * s * s))
        vals = (vals - vals.mean()) / vals.std()
        name = f"c{i + 1:02d}"
        fields[name] = CovariateField(
            name, window.x_min, window.y_min, dx, dy, vals
        )
    return fields


def build_model(window: Window, p: int, n_fields: int = 15,
                standardize: bool = True, seed: int = FIELD_SEED):
    """Model with p columns: intercept, main effects, then products.

    Uses min(n_fields, p - 1) main effects and fills the remainder
    with pairwise products c01:c02, c01:c03, ... in order.
    """
    if p < 2:
        raise ValueError("need at least an intercept plus one covariate")
    k = min(n_fields, p - 1)
    fields = make_fields(window, k, seed=seed)
    names = tuple(sorted(fields))
    n_inter = p - 1 - k
    pairs = []
    for a in range(k):
        for b in range(a + 1, k):
            if len(pairs) == n_inter:
                break
            pairs.append((names[a], names[b]))
        if len(pairs) == n_inter:
            break
    if len(pairs) < n_inter:
        raise ValueError(f"cannot build {p} columns from {k} covariates")
    spec = ModelSpec(covariates=names, interactions=tuple(pairs),
                     include_intercept=True, standardize=standardize)
    return spec, fields


@dataclass(frozen=True)
class StudyConfig:
    """Everything one selection study needs, all picklable."""

    process: str = "poisson"  # "poisson" | "thomas"
    window: Window = WINDOW_PRESETS["large"]
    mu: float = 2400.0
    p: int = 20
    n_replicates: int = 100
    methods: tuple[str, ...] = ("al", "alds")
    truth: tuple[tuple[int, float], ...] = ((1, 1.0), (2, -1.0))
    nu: float = 1.0
    n_lambda: int = 50
    lambda_min_ratio: float = 1e-4
    quad: tuple[int, int] | None = None
    kappa: float = 4e-4
    gamma: float = 15.0
    seed: int = 1
    workers: int = 1
    standardize: bool = True
    n_fields: int = 15

    def __post_init__(self):
        if self.process not in ("poisson", "thomas"):
            raise ValueError(f"unknown process '{self.process}'")
        for m in self.methods:
            if m not in ("al", "alds"):
                raise ValueError(f"unknown method '{m}'")
        if self.n_replicates < 1:
            raise ValueError("need at least one replicate")
        for j, _ in self.truth:
            if not 1 <= j < self.p:
                raise ValueError(
                    f"truth index {j} must name a non-intercept column"
                )


def config_from_file(path) -> StudyConfig:
    """Parse a flat key=value config file ('#' starts a comment)."""
    raw = {}
    with open(path) as fh:
        for ln in fh:
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            if "=" not in ln:
                raise PpselectError(f"malformed config line: {ln!r}")
            key, value = ln.split("=", 1)
            raw[key.strip()] = value.strip()

    known = {
        "process", "domain", "window", "mu", "p", "replicates", "nu",
        "n_lambda", "lambda_min_ratio", "kappa", "gamma", "seed", "workers",
        "n_fields", "methods", "truth", "quad", "standardize",
    }
    unknown = sorted(set(raw) - known)
    if unknown:
        raise PpselectError(f"unknown config keys: {', '.join(unknown)}")

    kwargs = {}
    if "process" in raw:
        kwargs["process"] = raw["process"]
    if "domain" in raw:
        name = raw["domain"]
        if name not in WINDOW_PRESETS:
            raise PpselectError(f"unknown domain preset '{name}'")
        kwargs["window"] = WINDOW_PRESETS[name]
        kwargs["mu"] = PRESET_MU[name]
    if "window" in raw:
        parts = [float(v) for v in raw["window"].split(",")]
        if len(parts) != 4:
            raise PpselectError("window needs x_min,x_max,y_min,y_max")
        kwargs["window"] = Window(*parts)
    if "mu" in raw:
        kwargs["mu"] = float(raw["mu"])
    for key, cast in (
        ("p", int), ("replicates", int), ("nu", float), ("n_lambda", int),
        ("lambda_min_ratio", float), ("kappa", float), ("gamma", float),
        ("seed", int), ("workers", int), ("n_fields", int),
    ):
        if key in raw:
            kwargs["n_replicates" if key == "replicates" else key] = cast(raw[key])
    if "methods" in raw:
        kwargs["methods"] = tuple(m.strip() for m in raw["methods"].split(","))
    if "truth" in raw:
        entries = []
        for part in raw["truth"].split(","):
            idx, value = part.split(":")
            entries.append((int(idx), float(value)))
        kwargs["truth"] = tuple(entries)
    if "quad" in raw and raw["quad"]:
        nx, ny = raw["quad"].lower().split("x")
        kwargs["quad"] = (int(nx), int(ny))
    if "standardize" in raw:
        kwargs["standardize"] = raw["standardize"].lower() in ("1", "true", "yes")
    return StudyConfig(**kwargs)


def true_coefficients(config: StudyConfig, spec: ModelSpec, fields: dict) -> np.ndarray:
    """Raw-scale truth with the intercept tuned to the target count."""
    beta = np.zeros(config.p)
    for j, value in config.truth:
        beta[j] = value
    beta = tune_intercept(config.window, spec, fields, beta, config.mu)
    return beta


@dataclass(frozen=True)
class ReplicateRecord:
    """Outcome of one method on one simulated pattern."""

    replicate: int
    method: str
    n_points: int
    support: tuple[int, ...]
    beta: tuple[float, ...]  # original scale, full length p
    selected_lambda: float
    bic: float
    n_nonzero: int
    seconds: float
    error: str | None = None


def _quad_size(config: StudyConfig):
    if config.quad is not None:
        return config.quad
    return None, None


def run_replicate(config: StudyConfig, spec: ModelSpec, fields: dict,
                  beta_true: np.ndarray, r: int) -> list[ReplicateRecord]:
    """Simulate replicate r and run every configured method on it."""
    rng = RngSpec(config.seed).child(r)
    if config.process == "poisson":
        pattern = sim_poisson(config.window, spec, fields, beta_true, rng)
    else:
        pattern = sim_thomas(config.window, spec, fields, beta_true,
                             config.kappa, config.gamma, rng)
    out = []
    if pattern.n == 0:
        for method in config.methods:
            out.append(ReplicateRecord(
                replicate=r, method=method, n_points=0, support=(),
                beta=(), selected_lambda=np.nan, bic=np.nan, n_nonzero=0,
                seconds=0.0, error="empty pattern",
            ))
        return out

    fit_spec = replace(spec, standardize=config.standardize)
    n_x, n_y = _quad_size(config)
    scheme = build_scheme(pattern, fit_spec, fields, n_x=n_x, n_y=n_y)
    pilot = mle(scheme).beta
    grid = GridSpec(n=config.n_lambda, min_ratio=config.lambda_min_ratio)

    for method in config.methods:
        start = time.perf_counter()
        try:
            path = select_lambda(scheme, method=method, nu=config.nu,
                                 grid=grid, beta_tilde=pilot)
            fit = path.selected
            seconds = time.perf_counter() - start
            out.append(ReplicateRecord(
                replicate=r, method=method, n_points=pattern.n,
                support=fit.support, beta=tuple(fit.beta_original()),
                selected_lambda=path.selected_lambda,
                bic=float(path.bics[path.selected_index]),
                n_nonzero=fit.n_nonzero, seconds=seconds,
            ))
        except PpselectError as exc:
            seconds = time.perf_counter() - start
            out.append(ReplicateRecord(
                replicate=r, method=method, n_points=pattern.n, support=(),
                beta=(), selected_lambda=np.nan, bic=np.nan, n_nonzero=0,
                seconds=seconds, error=str(exc),
            ))
    return out


def _worker(args):
    return run_replicate(*args)


@dataclass(frozen=True)
class StudyResult:
    """Aggregates plus the records they were computed from."""

    config: StudyConfig
    beta_true: tuple[float, ...]
    records: tuple[ReplicateRecord, ...]
    aggregates: dict = field(default_factory=dict)


def aggregate_records(config: StudyConfig, beta_true, records) -> dict:
    """Per-method TPR/FPR/RMSE summary recomputed from the records."""
    truth_support = tuple(j for j, _ in config.truth)
    out = {}
    for method in config.methods:
        rows = [rec for rec in records if rec.method == method]
        good = [rec for rec in rows if rec.error is None]
        rates = [tpr_fpr(rec.support, truth_support, config.p) for rec in good]
        if good:
            estimates = np.array([rec.beta for rec in good])
            method_rmse = rmse(estimates, beta_true)
            tpr = float(np.mean([t for t, _ in rates]))
            fpr = float(np.mean([f for _, f in rates]))
        else:
            method_rmse, tpr, fpr = np.nan, np.nan, np.nan
        out[method] = {
            "tpr": tpr,
            "fpr": fpr,
            "rmse": method_rmse,
            "n_replicates": len(rows),
            "n_failed": len(rows) - len(good),
            "mean_nonzero": float(np.mean([rec.n_nonzero for rec in good]))
            if good else np.nan,
            "mean_seconds": float(np.mean([rec.seconds for rec in good]))
            if good else np.nan,
        }
    return out


def run_study(config: StudyConfig) -> StudyResult:
    """Run all replicates (optionally in a process pool) and aggregate.

    Results are independent of the worker count: replicate randomness
    is keyed by index, and records are ordered by (replicate, method)
    before aggregation.  A study where more than 10% of replicates
    fail raises instead of reporting skewed numbers.
    """
    spec, fields = build_model(config.window, config.p,
                               n_fields=config.n_fields,
                               standardize=False, seed=FIELD_SEED)
    beta_true = true_coefficients(config, spec, fields)

    jobs = [(config, spec, fields, beta_true, r)
            for r in range(config.n_replicates)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_worker, jobs))
    else:
        chunks = [run_replicate(*job) for job in jobs]

    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda rec: (rec.replicate, rec.method))

    n_failed = sum(1 for rec in records if rec.error is not None)
    if n_failed > 0.1 * len(records):
        examples = [rec.error for rec in records if rec.error is not None][:3]
        raise PpselectError(
            f"{n_failed} of {len(records)} replicate fits failed; "
            f"first errors: {examples}"
        )
    aggregates = aggregate_records(config, beta_true, records)
    return StudyResult(
        config=config,
        beta_true=tuple(float(b) for b in beta_true),
        records=tuple(records),
        aggregates=aggregates,
    )


def write_summary_csv(result: StudyResult, path) -> None:
    """Deterministic aggregate table (no wall-clock columns)."""
    methods = list(result.config.methods)
    agg = result.aggregates
    write_csv([
        ("method", methods),
        ("tpr", [agg[m]["tpr"] for m in methods]),
        ("fpr", [agg[m]["fpr"] for m in methods]),
        ("rmse", [agg[m]["rmse"] for m in methods]),
        ("n_replicates", [agg[m]["n_replicates"] for m in methods]),
        ("n_failed", [agg[m]["n_failed"] for m in methods]),
        ("mean_nonzero", [agg[m]["mean_nonzero"] for m in methods]),
    ], path)


def write_records_csv(result: StudyResult, path) -> None:
    """Deterministic per-replicate table; one row per (replicate, method)."""
    recs = result.records
    p = result.config.p
    spec, _ = build_model(result.config.window, p,
                          n_fields=result.config.n_fields,
                          standardize=False)
    cols = [
        ("replicate", [r.replicate for r in recs]),
        ("method", [r.method for r in recs]),
        ("n_points", [r.n_points for r in recs]),
        ("selected_lambda", [r.selected_lambda for r in recs]),
        ("bic", [r.bic for r in recs]),
        ("n_nonzero", [r.n_nonzero for r in recs]),
        ("support", [";".join(str(j) for j in r.support) for r in recs]),
        ("error", [r.error or "" for r in recs]),
    ]
    for j, name in enumerate(spec.column_names):
        cols.append((f"beta_{name}",
                     [r.beta[j] if r.beta else "" for r in recs]))
    write_csv(cols, path)


def write_timing_csv(result: StudyResult, path) -> None:
    """Wall-clock summary; values vary run to run by nature."""
    methods = list(result.config.methods)
    agg = result.aggregates
    write_csv([
        ("method", methods),
        ("mean_seconds", [agg[m]["mean_seconds"] for m in methods]),
    ], path)
