"""Adaptive penalty weights, BIC scoring and the tuning path.

Weights follow lam_j = lam * |pilot_j|**(-nu): coefficients with a
zero pilot get an infinite level and stay at zero, and an unpenalized
coordinate (by default the intercept) keeps level 0 at every lam.
The path is evaluated on a descending log-spaced grid anchored at the
smallest level that zeroes every penalized coefficient, and the
selected fit minimizes BIC with ties resolved toward the larger lam.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, LpError, PpselectError
from .lasso import fit_al
from .dantzig import fit_alds
from .likelihood import LikelihoodCache, mle
from .quadrature import QuadratureScheme
from .results import FitResult, PenaltyWeights

METHODS = ("al", "alds")


def adaptive_weights(beta_tilde, lam: float, nu: float = 1.0,
                     unpenalized: int | None = None) -> PenaltyWeights:
    """Per-coefficient levels lam * |beta_tilde_j|**(-nu).

    lam = 0 turns the penalty off entirely; otherwise a zero pilot
    coordinate maps to an infinite level.
    """
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if nu <= 0:
        raise ValueError("nu must be positive")
    values = np.zeros(beta_tilde.size)
    if lam > 0:
        mag = np.abs(beta_tilde)
        with np.errstate(divide="ignore"):
            values = lam * mag ** (-nu)
    if unpenalized is not None:
        values[unpenalized] = 0.0
    return PenaltyWeights(values)


def bic(fit: FitResult, scheme: QuadratureScheme) -> float:
    """-2 loglik + (number of nonzero coefficients) * log(point count)."""
    m = scheme.n_data
    if m == 0:
        raise ValueError("BIC is undefined for an empty pattern")
    return -2.0 * fit.loglik + fit.n_nonzero * np.log(m)


def restricted_mle(scheme: QuadratureScheme, indices) -> np.ndarray:
    """Likelihood maximizer over a subset of coordinates, others zero."""
    indices = sorted(int(j) for j in indices)
    p = scheme.n_columns
    beta = np.zeros(p)
    if not indices:
        return beta
    cache = LikelihoodCache(scheme)
    sub = np.asarray(indices, dtype=int)
    for _ in range(100):
        u = cache.score(beta)[sub]
        if np.max(np.abs(u)) / scheme.n_points < 1e-10:
            return beta
        a = cache.sensitivity(beta)[np.ix_(sub, sub)]
        step = np.linalg.solve(a, u)
        current = cache.loglik(beta)
        slack = 1e-12 * (1.0 + abs(current))
        trial = beta.copy()
        for _ in range(30):
            trial[sub] = beta[sub] + step
            if cache.loglik(trial) >= current - slack:
                break
            step *= 0.5
        beta = trial
    raise ConvergenceError("restricted fit did not converge", last_iterate=beta)


def lambda_max(scheme: QuadratureScheme, beta_tilde, nu: float = 1.0,
               unpenalized: int | None = None) -> float:
    """Smallest lam for which every penalized coefficient is zero.

    At the fit restricted to the unpenalized coordinates, the
    zero-coefficient optimality condition |score_j| / mu <= lam_j
    binds first at max_j |score_j| |pilot_j|**nu / mu.
    """
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    mu = scheme.n_data
    if mu == 0:
        raise ValueError("cannot tune on an empty pattern")
    anchor = restricted_mle(
        scheme, [unpenalized] if unpenalized is not None else []
    )
    u = LikelihoodCache(scheme).score(anchor)
    best = 0.0
    for j in range(scheme.n_columns):
        if j == unpenalized or beta_tilde[j] == 0.0:
            continue
        best = max(best, abs(u[j]) * abs(beta_tilde[j]) ** nu / mu)
    return best


@dataclass(frozen=True)
class GridSpec:
    """Descending log-spaced grid: n points from lam_max down to
    lam_max * min_ratio, or explicit values."""

    n: int = 50
    min_ratio: float = 1e-4
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.values is not None:
            vals = tuple(float(v) for v in self.values)
            if any(v < 0 for v in vals):
                raise ValueError("explicit levels must be nonnegative")
            if list(vals) != sorted(vals, reverse=True):
                raise ValueError("explicit levels must be descending")
            object.__setattr__(self, "values", vals)
        else:
            if self.n < 1:
                raise ValueError("grid size must be positive")
            if not 0 < self.min_ratio <= 1:
                raise ValueError("min_ratio must lie in (0, 1]")

    def build(self, lam_max: float) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        if lam_max <= 0:
            return np.array([0.0])
        return np.geomspace(lam_max, lam_max * self.min_ratio, self.n)


@dataclass(frozen=True)
class LambdaPath:
    """Fits along a descending grid plus the BIC selection."""

    method: str
    lambdas: np.ndarray
    fits: tuple
    bics: np.ndarray
    errors: dict
    selected_index: int
    beta_tilde: np.ndarray

    @property
    def selected(self) -> FitResult:
        return self.fits[self.selected_index]

    @property
    def selected_lambda(self) -> float:
        return float(self.lambdas[self.selected_index])


def select_lambda(
    scheme: QuadratureScheme,
    method: str = "al",
    nu: float = 1.0,
    grid: GridSpec | None = None,
    beta_tilde: np.ndarray | None = None,
    penalize_intercept: bool = False,
) -> LambdaPath:
    """Fit along the grid and pick the BIC minimizer.

    The pilot defaults to the unpenalized maximum likelihood fit.
    Individual levels may fail without sinking the path; a path where
    every level fails raises.  Ties in BIC resolve to the larger lam
    (the sparser end), which the descending grid gives for free.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method '{method}', expected one of {METHODS}")
    mu = scheme.n_data
    if mu == 0:
        raise ValueError("cannot tune on an empty pattern")
    unpen = None
    if not penalize_intercept and scheme.spec.include_intercept:
        unpen = scheme.spec.intercept_index
    if beta_tilde is None:
        beta_tilde = mle(scheme).beta
    beta_tilde = np.asarray(beta_tilde, dtype=float)

    grid = grid or GridSpec()
    lambdas = grid.build(lambda_max(scheme, beta_tilde, nu, unpen))

    cache = LikelihoodCache(scheme)
    u_tilde = cache.score(beta_tilde)
    a_tilde = cache.sensitivity(beta_tilde)
    warm = restricted_mle(scheme, [unpen] if unpen is not None else [])

    fits, bics, errors = [], [], {}
    for i, lam in enumerate(lambdas):
        weights = adaptive_weights(beta_tilde, float(lam), nu, unpen)
        try:
            if method == "al":
                fit = fit_al(scheme, weights, init=warm)
                warm = fit.beta
            else:
                fit = fit_alds(scheme, weights, beta_tilde, u_tilde, a_tilde)
            fit = dataclasses.replace(fit, lam=float(lam))
            fits.append(fit)
            bics.append(bic(fit, scheme))
        except (ConvergenceError, LpError, PpselectError, ValueError) as exc:
            fits.append(None)
            bics.append(np.inf)
            errors[i] = str(exc)
    bics = np.asarray(bics)
    if not np.any(np.isfinite(bics)):
        raise ConvergenceError(
            f"every level on the grid failed; first error: {errors.get(0)}"
        )
    selected = int(np.argmin(bics))
    return LambdaPath(
        method=method,
        lambdas=lambdas,
        fits=tuple(fits),
        bics=bics,
        errors=errors,
        selected_index=selected,
        beta_tilde=beta_tilde,
    )
