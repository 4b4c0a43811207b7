"""Discretized composite likelihood, score, sensitivity and the MLE.

With nodes (z_i, w_i, y_i) and log intensity eta_i = beta' z_i:

    loglik(beta)       = sum_i w_i (y_i eta_i - exp(eta_i))
    score(beta)        = sum_i w_i z_i (y_i - exp(eta_i))
    sensitivity(beta)  = sum_i w_i z_i z_i' exp(eta_i)

y_i eta_i is used directly instead of y_i log rho_i, which is exact
for a log-linear intensity and avoids log(0).
"""
from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, NumericRangeError, RankDeficiencyError
from .quadrature import QuadratureScheme
from .results import FitResult, support_of

#: linear predictors are clamped to this magnitude before exponentiating
ETA_CLAMP = 700.0


class LikelihoodCache:
    """Memoizes the intensity at the most recent coefficient vector.

    The solvers evaluate the likelihood, score and sensitivity at the
    same beta in close succession; caching exp(Z beta) once per beta
    removes the dominant repeated cost.
    """

    def __init__(self, scheme: QuadratureScheme):
        self.scheme = scheme
        self._key = None
        self._eta = None
        self._rho = None
        self.clamped = False

    def _refresh(self, beta: np.ndarray):
        key = beta.tobytes()
        if key != self._key:
            eta = self.scheme.design @ beta
            hit = np.abs(eta) > ETA_CLAMP
            if np.any(hit):
                self.clamped = True
                eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
            self._key = key
            self._eta = eta
            self._rho = np.exp(eta)
        return self._eta, self._rho

    def loglik(self, beta: np.ndarray) -> float:
        eta, rho = self._refresh(beta)
        s = self.scheme
        value = float(np.dot(s.weights, s.response * eta - rho))
        if not np.isfinite(value):
            raise NumericRangeError(
                "composite log-likelihood overflowed despite clamping"
            )
        return value

    def score(self, beta: np.ndarray) -> np.ndarray:
        _, rho = self._refresh(beta)
        s = self.scheme
        return s.design.T @ (s.weights * (s.response - rho))

    def sensitivity(self, beta: np.ndarray) -> np.ndarray:
        _, rho = self._refresh(beta)
        s = self.scheme
        return s.design.T @ (s.design * (s.weights * rho)[:, None])


def loglik(scheme: QuadratureScheme, beta) -> float:
    return LikelihoodCache(scheme).loglik(np.asarray(beta, dtype=float))


def score(scheme: QuadratureScheme, beta) -> np.ndarray:
    return LikelihoodCache(scheme).score(np.asarray(beta, dtype=float))


def sensitivity(scheme: QuadratureScheme, beta) -> np.ndarray:
    return LikelihoodCache(scheme).sensitivity(np.asarray(beta, dtype=float))


def mle(
    scheme: QuadratureScheme,
    init=None,
    tol: float = 1e-8,
    max_iter: int = 50,
    max_halvings: int = 30,
) -> FitResult:
    """Unpenalized maximizer of the discretized likelihood.

    Newton iterations with step halving; converged when the largest
    score component, divided by the number of quadrature points, falls
    below ``tol``.
    """
    cache = LikelihoodCache(scheme)
    p = scheme.n_columns
    beta = np.zeros(p) if init is None else np.asarray(init, dtype=float).copy()
    n_nodes = scheme.n_points
    current = cache.loglik(beta)

    for it in range(1, max_iter + 1):
        u = cache.score(beta)
        if np.max(np.abs(u)) / n_nodes < tol:
            return _mle_result(scheme, cache, beta, current, it - 1)
        a = cache.sensitivity(beta)
        try:
            step = np.linalg.solve(a, u)
        except np.linalg.LinAlgError:
            raise RankDeficiencyError(
                f"sensitivity matrix is singular at iteration {it}; "
                "the design is rank deficient"
            ) from None
        trial = beta + step
        value = cache.loglik(trial)
        halved = 0
        # accept float-noise-level decreases: near the optimum the true
        # improvement can fall below one ulp of the likelihood
        slack = 1e-12 * (1.0 + abs(current))
        while value < current - slack and halved < max_halvings:
            step *= 0.5
            trial = beta + step
            value = cache.loglik(trial)
            halved += 1
        if value < current - slack and halved >= max_halvings:
            raise ConvergenceError(
                f"step halving failed to improve the likelihood at iteration {it}",
                last_iterate=beta,
            )
        beta, current = trial, value

    u = cache.score(beta)
    if np.max(np.abs(u)) / n_nodes < tol:
        return _mle_result(scheme, cache, beta, current, max_iter)
    raise ConvergenceError(
        f"Newton did not converge in {max_iter} iterations "
        f"(score norm {np.max(np.abs(u)):.3e})",
        last_iterate=beta,
    )


def _mle_result(scheme, cache, beta, value, n_iter) -> FitResult:
    u = cache.score(beta)
    return FitResult(
        method="MLE",
        beta=beta,
        names=scheme.spec.column_names,
        loglik=value,
        objective=value,
        n_outer=n_iter,
        n_inner=0,
        kkt_residual=float(np.max(np.abs(u)) / scheme.n_points),
        spec=scheme.spec,
        stats=scheme.stats,
        suspect=cache.clamped,
    )
