"""Dense two-phase primal simplex with dual certificates.

Solves   min c'x  s.t.  G x <= h,  E x = f,  lower <= x <= upper.

Every variable is split into a difference of nonnegatives and every
bound becomes an internal inequality row, so each original column
appears with both signs and the optimal basis yields exact dual
multipliers: stationarity c + G'lam + E'nu - pi_lo + pi_up = 0 holds
with lam, pi >= 0 read off the final basis solve.

Pivoting is deterministic: most negative reduced cost with
smallest-index ties, minimum ratio with smallest-basis-label ties,
and a permanent switch to Bland's rule after a long degenerate run.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LpError

TOL_FEAS = 1e-9
TOL_RC = 1e-9
TOL_PIVOT = 1e-10


@dataclass(frozen=True)
class LinearProgram:
    """min c'x subject to G x <= h, E x = f and optional bounds."""

    c: np.ndarray
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    E: np.ndarray | None = None
    f: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        object.__setattr__(self, "c", c)
        n = c.size
        if not np.all(np.isfinite(c)):
            raise ValueError("objective coefficients must be finite")

        def check_pair(A, b, label):
            if A is None and b is None:
                return None, None
            A = np.asarray(A, dtype=float)
            b = np.asarray(b, dtype=float).ravel()
            if A.ndim != 2 or A.shape[1] != n or A.shape[0] != b.size:
                raise ValueError(f"{label} has inconsistent shape")
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
                raise ValueError(f"{label} must be finite")
            return A, b

        G, h = check_pair(self.G, self.h, "inequality block")
        E, f = check_pair(self.E, self.f, "equality block")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "f", f)

        for attr in ("lower", "upper"):
            v = getattr(self, attr)
            if v is not None:
                v = np.asarray(v, dtype=float).ravel()
                if v.size != n:
                    raise ValueError(f"{attr} bounds have wrong length")
                object.__setattr__(self, attr, v)
        if self.lower is not None and self.upper is not None:
            if np.any(self.lower > self.upper):
                raise ValueError("lower bound exceeds upper bound")

    @property
    def n_variables(self) -> int:
        return self.c.size

    @property
    def n_inequalities(self) -> int:
        return 0 if self.G is None else self.G.shape[0]

    @property
    def n_equalities(self) -> int:
        return 0 if self.E is None else self.E.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    primal_objective: float | None = None
    dual_objective: float | None = None
    gap: float | None = None
    ineq_duals: np.ndarray | None = None
    eq_duals: np.ndarray | None = None
    lower_duals: np.ndarray | None = None
    upper_duals: np.ndarray | None = None
    n_pivots: int = 0
    diagnostics: dict = field(default_factory=dict)


def _internal_rows(lp: LinearProgram):
    """Assemble all constraints as rows (a, rhs, is_eq, tag).

    Tags identify where each multiplier belongs: ("ineq", i),
    ("lower", j), ("upper", j) or ("eq", k).
    """
    n = lp.n_variables
    rows, rhs, is_eq, tags = [], [], [], []
    if lp.G is not None:
        for i in range(lp.G.shape[0]):
            rows.append(lp.G[i])
            rhs.append(lp.h[i])
            is_eq.append(False)
            tags.append(("ineq", i))
    if lp.lower is not None:
        for j in range(n):
            if np.isfinite(lp.lower[j]):
                e = np.zeros(n)
                e[j] = -1.0
                rows.append(e)
                rhs.append(-lp.lower[j])
                is_eq.append(False)
                tags.append(("lower", j))
    if lp.upper is not None:
        for j in range(n):
            if np.isfinite(lp.upper[j]):
                e = np.zeros(n)
                e[j] = 1.0
                rows.append(e)
                rhs.append(lp.upper[j])
                is_eq.append(False)
                tags.append(("upper", j))
    if lp.E is not None:
        for k in range(lp.E.shape[0]):
            rows.append(lp.E[k])
            rhs.append(lp.f[k])
            is_eq.append(True)
            tags.append(("eq", k))
    R = np.asarray(rows, dtype=float).reshape(len(rows), n)
    return R, np.asarray(rhs, dtype=float), np.asarray(is_eq, dtype=bool), tags


def solve_lp(
    lp: LinearProgram,
    tol_feas: float = TOL_FEAS,
    tol_rc: float = TOL_RC,
    max_pivots: int | None = None,
) -> LpSolution:
    """Solve the program; see the module docstring for conventions."""
    n = lp.n_variables
    R, rhs, is_eq, tags = _internal_rows(lp)

    # Drop all-zero rows, detecting trivial infeasibility.
    keep = []
    for r in range(R.shape[0]):
        m = np.max(np.abs(R[r])) if R.shape[1] else 0.0
        if m <= 0.0:
            bad = (is_eq[r] and abs(rhs[r]) > tol_feas) or (
                not is_eq[r] and rhs[r] < -tol_feas
            )
            if bad:
                return LpSolution(status="infeasible")
            continue
        keep.append(r)
    R, rhs, is_eq = R[keep], rhs[keep], is_eq[keep]
    tags = [tags[r] for r in keep]
    m = R.shape[0]

    # Row equilibration: normalize each row's largest coefficient to 1.
    scale = np.max(np.abs(R), axis=1) if m else np.ones(0)
    R = R / scale[:, None] if m else R
    rhs = rhs / scale if m else rhs

    # Orient rows so the right-hand side is nonnegative.
    sigma = np.where(rhs < 0, -1.0, 1.0)
    R = R * sigma[:, None]
    b0 = rhs * sigma

    # Standard form columns: [x+ | x- | slacks].
    n_slack = int(np.count_nonzero(~is_eq))
    N = 2 * n + n_slack
    A = np.zeros((m, N))
    A[:, :n] = R
    A[:, n:2 * n] = -R
    slack_col_of_row = np.full(m, -1, dtype=int)
    s = 0
    for r in range(m):
        if not is_eq[r]:
            A[r, 2 * n + s] = sigma[r]
            slack_col_of_row[r] = 2 * n + s
            s += 1

    # Phase 1 basis: slack where it enters with +1, artificial otherwise.
    art_cols = []
    basis = np.empty(m, dtype=int)
    full_cols = [A]
    for r in range(m):
        if slack_col_of_row[r] >= 0 and sigma[r] > 0:
            basis[r] = slack_col_of_row[r]
        else:
            e = np.zeros((m, 1))
            e[r, 0] = 1.0
            full_cols.append(e)
            basis[r] = N + len(art_cols)
            art_cols.append(N + len(art_cols))
    A1 = np.hstack(full_cols) if len(full_cols) > 1 else A.copy()
    c1 = np.zeros(A1.shape[1])
    c1[N:] = 1.0

    if max_pivots is None:
        max_pivots = 1000 + 50 * (m + A1.shape[1])

    T = A1.copy()
    b = b0.copy()
    state = _SimplexState(T, b, basis, tol_rc, TOL_PIVOT, max_pivots)

    status1 = state.run(c1)
    if status1 == "stall":
        raise LpError("simplex stalled in phase 1 (numerical trouble)")
    if status1 == "unbounded":
        raise LpError("phase 1 reported an unbounded direction; the "
                      "tableau is numerically inconsistent")
    phase1_obj = float(c1[state.basis] @ state.b)
    if phase1_obj > tol_feas * (1.0 + float(np.max(b0, initial=0.0))) * max(
        1.0, np.sqrt(m)
    ):
        return LpSolution(status="infeasible", n_pivots=state.n_pivots)

    # Remove artificials from the basis (pivot out or drop redundant rows).
    kept_rows = state.drive_out_artificials(N)

    # Phase 2 on the real columns.
    state.T = state.T[:, :N]
    c2 = np.concatenate([lp.c, -lp.c, np.zeros(n_slack)])
    status2 = state.run(c2)
    if status2 == "stall":
        raise LpError("simplex stalled in phase 2 (numerical trouble)")
    if status2 == "unbounded":
        return LpSolution(status="unbounded", n_pivots=state.n_pivots)

    # Primal solution.
    x_std = np.zeros(N)
    x_std[state.basis] = state.b
    x = x_std[:n] - x_std[n:2 * n]

    # Dual multipliers from the final basis, mapped back through the
    # orientation and equilibration applied to each surviving row.
    A2_rows = A[kept_rows]
    B = A2_rows[:, state.basis]
    try:
        y = np.linalg.solve(B.T, c2[state.basis])
    except np.linalg.LinAlgError:
        raise LpError("optimal basis is singular; cannot extract duals") from None

    mult = np.zeros(m)  # multiplier of each internal row, original scale
    for pos, r in enumerate(kept_rows):
        mult[r] = sigma[r] * y[pos] / scale[r]

    ineq_duals = np.zeros(lp.n_inequalities)
    eq_duals = np.zeros(lp.n_equalities)
    lower_duals = np.zeros(n)
    upper_duals = np.zeros(n)
    dual_obj = 0.0
    for r, (kind, idx) in enumerate(tags):
        lam = -mult[r]
        rhs_r = rhs[r] * scale[r]  # original right-hand side
        if kind == "eq":
            eq_duals[idx] = lam
        else:
            lam = max(lam, 0.0)  # roundoff-scale negatives are zeros
            if kind == "ineq":
                ineq_duals[idx] = lam
            elif kind == "lower":
                lower_duals[idx] = lam
            else:
                upper_duals[idx] = lam
        dual_obj -= lam * rhs_r

    primal_obj = float(lp.c @ x)
    diagnostics = _certificate(lp, x, ineq_duals, eq_duals, lower_duals, upper_duals)
    return LpSolution(
        status="optimal",
        x=x,
        primal_objective=primal_obj,
        dual_objective=float(dual_obj),
        gap=abs(primal_obj - dual_obj),
        ineq_duals=ineq_duals,
        eq_duals=eq_duals,
        lower_duals=lower_duals,
        upper_duals=upper_duals,
        n_pivots=state.n_pivots,
        diagnostics=diagnostics,
    )


class _SimplexState:
    """Tableau, basis and pivot bookkeeping shared by the two phases."""

    def __init__(self, T, b, basis, tol_rc, tol_pivot, max_pivots):
        self.T = T
        self.b = b
        self.basis = basis
        self.tol_rc = tol_rc
        self.tol_pivot = tol_pivot
        self.max_pivots = max_pivots
        self.n_pivots = 0
        self.bland = False
        self._degenerate_run = 0

    def run(self, c) -> str:
        """Pivot until optimal/unbounded/stall for the given costs."""
        bland_after = 5 * (self.T.shape[0] + self.T.shape[1])
        while True:
            rc = c[: self.T.shape[1]] - c[self.basis] @ self.T
            rc[self.basis] = 0.0
            if self.bland:
                candidates = np.nonzero(rc < -self.tol_rc)[0]
                if candidates.size == 0:
                    return "optimal"
                j = int(candidates[0])
            else:
                j = int(np.argmin(rc))
                if rc[j] >= -self.tol_rc:
                    return "optimal"
            col = self.T[:, j]
            pos = col > self.tol_pivot
            if not np.any(pos):
                return "unbounded"
            ratios = np.full(col.shape, np.inf)
            ratios[pos] = self.b[pos] / col[pos]
            rmin = float(np.min(ratios))
            tied = np.nonzero(ratios <= rmin + 1e-12 * (1.0 + abs(rmin)))[0]
            i = int(tied[np.argmin(self.basis[tied])])

            if self.n_pivots >= self.max_pivots:
                return "stall"
            self._pivot(i, j)
            if rmin <= 1e-11:
                self._degenerate_run += 1
                if self._degenerate_run > bland_after:
                    self.bland = True
            else:
                self._degenerate_run = 0

    def _pivot(self, i, j):
        piv = self.T[i, j]
        self.T[i] /= piv
        self.b[i] /= piv
        factor = self.T[:, j].copy()
        factor[i] = 0.0
        self.T -= np.outer(factor, self.T[i])
        self.b -= factor * self.b[i]
        self.T[:, j] = 0.0
        self.T[i, j] = 1.0
        self.basis[i] = j
        self.n_pivots += 1

    def drive_out_artificials(self, n_real: int):
        """Pivot artificial variables out of the basis, dropping any
        redundant rows; returns the surviving row indices."""
        kept = list(range(self.T.shape[0]))
        drop = []
        for i in range(self.T.shape[0]):
            if self.basis[i] < n_real:
                continue
            row = self.T[i, :n_real]
            nz = np.nonzero(np.abs(row) > self.tol_pivot)[0]
            nz = [j for j in nz if j not in set(self.basis.tolist())]
            if nz:
                self._pivot(i, int(nz[0]))
            else:
                drop.append(i)
        if drop:
            keep_mask = np.ones(self.T.shape[0], dtype=bool)
            keep_mask[drop] = False
            self.T = self.T[keep_mask]
            self.b = self.b[keep_mask]
            self.basis = self.basis[keep_mask]
            kept = [r for r in kept if keep_mask[r]]
        return kept


def _certificate(lp, x, ineq_duals, eq_duals, lower_duals, upper_duals) -> dict:
    """Numerical KKT residuals of the returned primal/dual pair."""
    n = lp.n_variables
    primal_viol = 0.0
    comp_slack = 0.0
    if lp.G is not None:
        slack = lp.h - lp.G @ x
        primal_viol = max(primal_viol, float(np.max(-slack, initial=0.0)))
        comp_slack = max(comp_slack, float(np.max(np.abs(ineq_duals * slack), initial=0.0)))
    if lp.E is not None:
        primal_viol = max(primal_viol, float(np.max(np.abs(lp.E @ x - lp.f), initial=0.0)))
    grad = lp.c.copy()
    if lp.G is not None:
        grad += lp.G.T @ ineq_duals
    if lp.E is not None:
        grad += lp.E.T @ eq_duals
    grad -= lower_duals
    grad += upper_duals
    if lp.lower is not None:
        s = x - lp.lower
        fin = np.isfinite(lp.lower)
        primal_viol = max(primal_viol, float(np.max(-s[fin], initial=0.0)))
        comp_slack = max(
            comp_slack, float(np.max(np.abs(lower_duals[fin] * s[fin]), initial=0.0))
        )
    if lp.upper is not None:
        s = lp.upper - x
        fin = np.isfinite(lp.upper)
        primal_viol = max(primal_viol, float(np.max(-s[fin], initial=0.0)))
        comp_slack = max(
            comp_slack, float(np.max(np.abs(upper_duals[fin] * s[fin]), initial=0.0))
        )
    return {
        "primal_violation": primal_viol,
        "dual_stationarity": float(np.max(np.abs(grad), initial=0.0)),
        "complementary_slackness": comp_slack,
    }


def dump_lp(lp: LinearProgram, path) -> None:
    """Write a readable listing of the program."""
    lines = [f"minimize  {_comb(lp.c)}"]
    if lp.G is not None:
        lines.append("subject to (<=):")
        for i in range(lp.G.shape[0]):
            lines.append(f"  {_comb(lp.G[i])} <= {lp.h[i]!r}")
    if lp.E is not None:
        lines.append("subject to (=):")
        for k in range(lp.E.shape[0]):
            lines.append(f"  {_comb(lp.E[k])} = {lp.f[k]!r}")
    if lp.lower is not None or lp.upper is not None:
        lines.append("bounds:")
        lo = lp.lower if lp.lower is not None else np.full(lp.n_variables, -np.inf)
        up = lp.upper if lp.upper is not None else np.full(lp.n_variables, np.inf)
        for j in range(lp.n_variables):
            if np.isfinite(lo[j]) or np.isfinite(up[j]):
                lines.append(f"  {lo[j]!r} <= x{j} <= {up[j]!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _comb(coeffs) -> str:
    terms = [f"{c!r}*x{j}" for j, c in enumerate(coeffs) if c != 0.0]
    return " + ".join(terms) if terms else "0"
