"""L1-penalized fitting by reweighting plus coordinate descent.

The outer loop builds a weighted least squares surrogate at the
current iterate; the inner loop solves the penalized surrogate by
cyclic coordinate descent with soft thresholding.  Objectives are
normalized by the observed point count mu, and the surrogate's
gradient at the expansion point matches the exact score, so the inner
optimality conditions become the exact ones at a fixed point.
"""
from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DegenerateColumnError
from .likelihood import ETA_CLAMP, LikelihoodCache
from .quadrature import QuadratureScheme
from .results import FitResult, PenaltyWeights, snap_hard_zeros

MAX_CD_CYCLES = 2000


def soft_threshold(z: float, g: float) -> float:
    """sign(z) * max(|z| - g, 0)."""
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


def irls_working_data(scheme: QuadratureScheme, beta_check: np.ndarray):
    """Weighted least squares surrogate at beta_check.

    Returns (psi, y_star): case weights psi_i = w_i rho_i and working
    responses y_star_i = eta_i + (y_i - rho_i) / rho_i.
    """
    eta = np.clip(scheme.design @ beta_check, -ETA_CLAMP, ETA_CLAMP)
    rho = np.exp(eta)
    psi = scheme.weights * rho
    y_star = eta + (scheme.response - rho) / rho
    return psi, y_star


def cd_solve(
    Z: np.ndarray,
    psi: np.ndarray,
    y_star: np.ndarray,
    weights: PenaltyWeights,
    mu: float,
    init: np.ndarray,
    names=None,
    tol: float = 1e-9,
    max_cycles: int = MAX_CD_CYCLES,
):
    """Minimize (1/2mu) sum_i psi_i (y*_i - z_i'b)^2 + sum_j lam_j |b_j|.

    Cyclic coordinate descent with an active-set loop: after the
    first sweeps only the nonzero coordinates are cycled, and a full
    sweep checks optimality before returning.  Returns
    (beta, n_cycles, kkt_residual).
    """
    lam = weights.values
    frozen = weights.frozen
    p = Z.shape[1]
    beta = np.asarray(init, dtype=float).copy()
    beta[frozen] = 0.0

    # work on the Gram system: each coordinate update touches only the
    # p-vector G beta instead of an n-vector residual
    weighted = Z * psi[:, None]
    gram = weighted.T @ Z
    target = Z.T @ (psi * y_star)
    d = np.diag(gram).copy()
    for j in range(p):
        if not frozen[j] and d[j] <= 0.0:
            label = names[j] if names is not None else f"column {j}"
            raise DegenerateColumnError(
                f"design column '{label}' has zero curvature under the "
                "current case weights"
            )

    s = gram @ beta
    active = [j for j in range(p) if not frozen[j]]
    thresholds = lam * mu

    def sweep(indices):
        nonlocal s
        delta = 0.0
        for j in indices:
            old = beta[j]
            rj = target[j] - s[j] + d[j] * old
            new = soft_threshold(rj, thresholds[j]) / d[j]
            if new != old:
                s += gram[:, j] * (new - old)
                beta[j] = new
                delta = max(delta, abs(new - old))
        return delta

    def kkt_residual():
        nonlocal s
        s = gram @ beta  # drop incremental drift before certifying
        grad = (s - target) / mu
        r = 0.0
        for j in active:
            if beta[j] != 0.0:
                r = max(r, abs(grad[j] + lam[j] * np.sign(beta[j])))
            else:
                r = max(r, max(abs(grad[j]) - lam[j], 0.0))
        return r

    n_cycles = 0
    while n_cycles < max_cycles:
        delta = sweep(active)
        n_cycles += 1
        if delta < tol:
            r = kkt_residual()
            if r < max(tol, 1e-12):
                return beta, n_cycles, r
        # inner loop over the current support only
        support = [j for j in active if beta[j] != 0.0]
        while n_cycles < max_cycles:
            delta = sweep(support)
            n_cycles += 1
            if delta < tol:
                break
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_cycles} cycles",
        last_iterate=beta,
    )


def penalized_objective(cache: LikelihoodCache, weights: PenaltyWeights,
                        beta: np.ndarray, mu: float) -> float:
    """-loglik(beta)/mu + sum_j lam_j |beta_j| (finite levels only)."""
    return -cache.loglik(beta) / mu + weights.penalty(beta)


def fit_al(
    scheme: QuadratureScheme,
    weights: PenaltyWeights,
    init: np.ndarray | None = None,
    tol_outer: float = 1e-7,
    tol_inner: float = 1e-9,
    max_outer: int = 100,
    kkt_tol: float = 1e-7,
    max_halvings: int = 30,
) -> FitResult:
    """Penalized composite likelihood fit.

    Alternates surrogate construction and coordinate descent, halving
    the step toward the previous iterate whenever the exact penalized
    objective would increase, so the objective is non-increasing.
    Convergence requires both a small step and a small optimality
    residual of the exact problem.
    """
    mu = scheme.n_data
    if mu == 0:
        raise ValueError("cannot fit a penalized model to an empty pattern")
    if weights.values.size != scheme.n_columns:
        raise ValueError("penalty weights do not match the design width")

    cache = LikelihoodCache(scheme)
    if init is None:
        from .likelihood import mle

        beta = mle(scheme).beta.copy()
    else:
        beta = np.asarray(init, dtype=float).copy()
    beta[weights.frozen] = 0.0

    names = scheme.spec.column_names
    current = penalized_objective(cache, weights, beta, mu)
    history = [beta.copy()]
    total_cycles = 0

    for outer in range(1, max_outer + 1):
        psi, y_star = irls_working_data(scheme, beta)
        cand, cycles, _ = cd_solve(
            scheme.design, psi, y_star, weights, mu, beta,
            names=names, tol=tol_inner,
        )
        total_cycles += cycles

        value = penalized_objective(cache, weights, cand, mu)
        halved = 0
        slack = 1e-12 * (1.0 + abs(current))
        while value > current + slack and halved < max_halvings:
            cand = 0.5 * (cand + beta)
            value = penalized_objective(cache, weights, cand, mu)
            halved += 1
        if value > current + slack:
            raise ConvergenceError(
                f"objective increased at outer iteration {outer} despite "
                "step halving",
                last_iterate=beta,
            )

        delta = float(np.max(np.abs(cand - beta))) if cand.size else 0.0
        beta, current = cand, value

        if delta < tol_outer:
            snapped = snap_hard_zeros(beta)
            residual = _exact_kkt(cache, weights, snapped, mu)
            if residual < kkt_tol:
                return FitResult(
                    method="AL",
                    beta=snapped,
                    names=names,
                    loglik=cache.loglik(snapped),
                    objective=penalized_objective(cache, weights, snapped, mu),
                    n_outer=outer,
                    n_inner=total_cycles,
                    kkt_residual=residual,
                    spec=scheme.spec,
                    stats=scheme.stats,
                    weights=weights,
                    suspect=cache.clamped,
                )

        for past in history[-3:-1]:
            if delta >= tol_outer and np.max(np.abs(beta - past)) < 1e-13:
                raise ConvergenceError(
                    f"iterates oscillate without progress at outer "
                    f"iteration {outer}",
                    last_iterate=beta,
                )
        history.append(beta.copy())
        if len(history) > 4:
            history.pop(0)

    raise ConvergenceError(
        f"penalized fit did not converge in {max_outer} outer iterations",
        last_iterate=beta,
    )


def _exact_kkt(cache: LikelihoodCache, weights: PenaltyWeights,
               beta: np.ndarray, mu: float) -> float:
    """Optimality residual of the exact penalized problem.

    Nonzero coordinates must satisfy score_j/mu = lam_j sign(beta_j);
    zero coordinates must satisfy |score_j/mu| <= lam_j.
    """
    g = cache.score(beta) / mu
    lam = weights.values
    r = 0.0
    for j in range(beta.size):
        if weights.frozen[j]:
            continue
        if beta[j] != 0.0:
            r = max(r, abs(g[j] - lam[j] * np.sign(beta[j])))
        else:
            r = max(r, max(abs(g[j]) - lam[j], 0.0))
    return r
