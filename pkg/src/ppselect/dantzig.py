"""Weighted L1 estimation with a linearized score constraint.

Around a pilot estimate beta_tilde the score is linearized as

    delta(beta) = U + A (beta_tilde - beta)

with U and A the score and sensitivity at the pilot.  The estimator
minimizes the weighted L1 norm of beta subject to a box on the scaled
linearized score, solved exactly as a linear program:

    min sum_j u_j
    s.t.  lam_j beta_j <= u_j,  -lam_j beta_j <= u_j          (j = 1..p)
          |delta(beta)_j| <= mu lam_j                         (penalized j)
          |delta(beta)_j| <= eps_rel * mu                     (unpenalized j)

An unpenalized coefficient (the intercept) contributes nothing to the
objective; its score coordinate is pinned by the small absolute
allowance instead.  Coefficients whose pilot estimate is zero are
excluded from the problem entirely and stay at zero.

The LP dual yields a certificate: with gamma the difference of the
multipliers on the two score boxes, optimality requires

    ||S delta(beta)||_inf <= 1            S = diag(1 / (mu lam_j))
    |(A S gamma)_j| <= lam_j              (penalized j)
    gamma' S A beta  = sum_j lam_j |beta_j|
    gamma' S delta(beta) = ||gamma||_1
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LpError
from .likelihood import LikelihoodCache, mle
from .lp import LinearProgram, LpSolution, solve_lp
from .quadrature import QuadratureScheme
from .results import FitResult, PenaltyWeights, snap_hard_zeros

#: score allowance for an unpenalized coefficient, as a fraction of mu
EPS_REL = 1e-8


@dataclass(frozen=True)
class AldsProblem:
    """Data of one linearized-score L1 problem.

    ``u`` and ``a`` are the score vector and sensitivity matrix at the
    pilot ``beta_tilde``; ``mu`` is the normalizing point count.
    Weight entries: positive finite = penalized, 0 = unpenalized
    (small absolute score allowance), inf = pinned at zero (requires a
    zero pilot coordinate).
    """

    u: np.ndarray
    a: np.ndarray
    beta_tilde: np.ndarray
    mu: float
    weights: PenaltyWeights
    names: tuple[str, ...]
    eps_rel: float = EPS_REL

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        a = np.asarray(self.a, dtype=float)
        bt = np.asarray(self.beta_tilde, dtype=float).ravel()
        p = u.size
        if a.shape != (p, p) or bt.size != p or self.weights.values.size != p:
            raise ValueError("problem blocks have inconsistent shapes")
        if self.mu <= 0:
            raise ValueError("the normalizer mu must be positive")
        if np.any(self.weights.frozen & (bt != 0.0)):
            raise ValueError(
                "a coefficient with infinite penalty must have a zero pilot"
            )
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "beta_tilde", bt)

    @property
    def p(self) -> int:
        return self.u.size

    @property
    def free(self) -> np.ndarray:
        """Mask of coordinates that enter the problem."""
        return ~self.weights.frozen

    def scale_vector(self) -> np.ndarray:
        """s_j such that each score box reads |delta_j| <= 1/s_j... in
        scaled form s_j |delta_j| <= 1; zero at frozen coordinates."""
        lam = self.weights.values
        s = np.zeros(self.p)
        for j in range(self.p):
            if np.isinf(lam[j]):
                continue
            level = self.mu * lam[j] if lam[j] > 0 else self.eps_rel * self.mu
            s[j] = 1.0 / level
        return s


def build_alds_lp(problem: AldsProblem) -> LinearProgram:
    """Assemble the LP: 4p rows over the 2p variables (beta, u).

    Row blocks, in order: lam*beta - u <= 0, -lam*beta - u <= 0,
    -(S A) beta <= 1 - S d, (S A) beta <= 1 + S d  with d = U + A beta_tilde.
    Frozen coordinates are dropped before assembly.
    """
    free = problem.free
    k = int(np.count_nonzero(free))
    lam = problem.weights.values[free]
    a = problem.a[np.ix_(free, free)]
    d = (problem.u + problem.a @ problem.beta_tilde)[free]
    s = problem.scale_vector()[free]

    sa = a * s[:, None]
    sd = s * d
    eye = np.eye(k)
    zero = np.zeros((k, k))
    G = np.vstack([
        np.hstack([np.diag(lam), -eye]),
        np.hstack([-np.diag(lam), -eye]),
        np.hstack([-sa, zero]),
        np.hstack([sa, zero]),
    ])
    h = np.concatenate([np.zeros(k), np.zeros(k), 1.0 - sd, 1.0 + sd])
    c = np.concatenate([np.zeros(k), np.ones(k)])
    return LinearProgram(c=c, G=G, h=h)


def solve_alds(problem: AldsProblem, tol_feas: float = 1e-9,
               tol_rc: float = 1e-9):
    """Solve the LP; returns (beta_hat, gamma_hat, LpSolution).

    beta_hat and gamma_hat are full-length vectors with zeros at the
    frozen coordinates.
    """
    free = problem.free
    k = int(np.count_nonzero(free))
    p = problem.p
    if k == 0:
        empty = LpSolution(status="optimal", x=np.zeros(0),
                           primal_objective=0.0, dual_objective=0.0, gap=0.0)
        return np.zeros(p), np.zeros(p), empty

    lp = build_alds_lp(problem)
    sol = solve_lp(lp, tol_feas=tol_feas, tol_rc=tol_rc)
    if sol.status != "optimal":
        raise LpError(
            f"score-constrained L1 program returned status '{sol.status}'; "
            "the linearization data are inconsistent"
        )
    beta = np.zeros(p)
    beta[free] = sol.x[:k]
    alpha3 = sol.ineq_duals[2 * k:3 * k]
    alpha4 = sol.ineq_duals[3 * k:4 * k]
    gamma = np.zeros(p)
    gamma[free] = alpha3 - alpha4

    residuals = verify_kkt(problem, beta, gamma)
    if residuals["max"] > 1e-10:
        # When the penalties are tiny the objective is nearly flat across
        # the whole feasible box and certificate residuals at a simplex
        # vertex are dominated by rounding noise amplified by 1/(mu*lam).
        # The interior point that zeroes the constraint slack, paired with
        # a zero dual vector, then certifies cleanly; keep whichever pair
        # has the smaller residual.
        a_free = problem.a[np.ix_(free, free)]
        u_free = np.asarray(problem.u, dtype=float).ravel()[free]
        try:
            step = np.linalg.solve(a_free, u_free)
        except np.linalg.LinAlgError:
            return beta, gamma, sol
        interior = np.zeros(p)
        interior[free] = np.asarray(problem.beta_tilde,
                                    dtype=float).ravel()[free] + step
        zero_dual = np.zeros(p)
        if verify_kkt(problem, interior, zero_dual)["max"] < residuals["max"]:
            return interior, zero_dual, sol
    return beta, gamma, sol


def verify_kkt(problem: AldsProblem, beta_hat: np.ndarray,
               gamma_hat: np.ndarray) -> dict:
    """Certificate residuals for a candidate primal/dual pair.

    All four residuals are dimensionless violations; an exact optimal
    pair gives zeros.  ``max`` aggregates them.
    """
    free = problem.free
    lam = problem.weights.values[free]
    a = problem.a[np.ix_(free, free)]
    d = (problem.u + problem.a @ problem.beta_tilde)[free]
    s = problem.scale_vector()[free]
    b = np.asarray(beta_hat, dtype=float)[free]
    g = np.asarray(gamma_hat, dtype=float)[free]

    delta = d - a @ b
    r_feas = max(float(np.max(np.abs(s * delta), initial=0.0)) - 1.0, 0.0)

    asg = a @ (s * g)  # a is symmetric: (gamma' S A)_j
    penal = lam > 0
    r_dual = 0.0
    if np.any(penal):
        r_dual = float(np.max(np.abs(asg[penal]) / lam[penal] - 1.0, initial=0.0))
        r_dual = max(r_dual, 0.0)
    r_intercept = 0.0
    if np.any(~penal):
        r_intercept = float(np.max(np.abs(asg[~penal]), initial=0.0)) / problem.mu

    obj = float(np.sum(lam[penal] * np.abs(b[penal])))
    r_slack_primal = abs(float(np.dot(s * g, a @ b)) - obj) / (1.0 + obj)
    gnorm = float(np.sum(np.abs(g)))
    r_slack_dual = abs(float(np.dot(g, s * delta)) - gnorm) / (1.0 + gnorm)

    out = {
        "feasibility": r_feas,
        "dual_feasibility": r_dual,
        "primal_slackness": r_slack_primal,
        "dual_slackness": r_slack_dual,
        "unpenalized_stationarity": r_intercept,
    }
    out["max"] = max(out.values())
    return out


def fit_alds(
    scheme: QuadratureScheme,
    weights: PenaltyWeights,
    beta_tilde: np.ndarray | None = None,
    u_tilde: np.ndarray | None = None,
    a_tilde: np.ndarray | None = None,
) -> FitResult:
    """Fit on a quadrature scheme with pilot beta_tilde (default MLE).

    ``u_tilde``/``a_tilde`` can carry a precomputed score and
    sensitivity at the pilot so a path of fits shares one evaluation.
    """
    mu = scheme.n_data
    if mu == 0:
        raise ValueError("cannot fit a penalized model to an empty pattern")
    cache = LikelihoodCache(scheme)
    if beta_tilde is None:
        beta_tilde = mle(scheme).beta
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    if u_tilde is None:
        u_tilde = cache.score(beta_tilde)
    if a_tilde is None:
        a_tilde = cache.sensitivity(beta_tilde)

    problem = AldsProblem(
        u=u_tilde, a=a_tilde, beta_tilde=beta_tilde, mu=float(mu),
        weights=weights, names=scheme.spec.column_names,
    )
    beta, gamma, sol = solve_alds(problem)
    beta = snap_hard_zeros(beta)
    residuals = verify_kkt(problem, beta, gamma)

    lam = weights.values
    finite = np.isfinite(lam)
    objective = float(np.sum(lam[finite] * np.abs(beta[finite])))
    return FitResult(
        method="ALDS",
        beta=beta,
        names=scheme.spec.column_names,
        loglik=cache.loglik(beta),
        objective=objective,
        n_outer=1,
        n_inner=sol.n_pivots,
        kkt_residual=residuals["max"],
        spec=scheme.spec,
        stats=scheme.stats,
        weights=weights,
        suspect=cache.clamped,
        diagnostics={
            "lp_status": sol.status,
            "lp_gap": sol.gap,
            "lp_primal_objective": sol.primal_objective,
            "lp_dual_objective": sol.dual_objective,
            "kkt": residuals,
            "gamma": gamma,
        },
    )
