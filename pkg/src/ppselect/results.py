"""Result containers shared by the estimators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ModelSpec, StandardizationStats, to_original_scale

#: coefficients with absolute value below this are snapped to exact zero
HARD_ZERO = 1e-10


@dataclass(frozen=True)
class PenaltyWeights:
    """Per-coefficient penalty levels lambda_j.

    Entries may be 0 (unpenalized, e.g. the intercept), a positive
    finite level, or ``inf`` for a coefficient pinned at zero (the
    adaptive weight of a coefficient whose pilot estimate is zero).
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if np.any(np.isnan(v)) or np.any(v < 0):
            raise ValueError("penalty levels must be nonnegative (or inf)")
        object.__setattr__(self, "values", v)

    @property
    def frozen(self) -> np.ndarray:
        """Mask of coefficients pinned at zero by an infinite level."""
        return np.isinf(self.values)

    @property
    def penalized(self) -> np.ndarray:
        """Mask of coefficients with a finite positive level."""
        return np.isfinite(self.values) & (self.values > 0)

    def penalty(self, beta: np.ndarray) -> float:
        """sum_j lambda_j |beta_j| over the finite levels."""
        finite = np.isfinite(self.values)
        return float(np.sum(self.values[finite] * np.abs(beta[finite])))


def support_of(beta: np.ndarray) -> tuple[int, ...]:
    return tuple(int(j) for j in np.nonzero(beta)[0])


def snap_hard_zeros(beta: np.ndarray, tol: float = HARD_ZERO) -> np.ndarray:
    out = np.where(np.abs(beta) < tol, 0.0, beta)
    return out


@dataclass(frozen=True)
class FitResult:
    """One fitted coefficient vector with its diagnostics.

    ``beta`` lives on the scale of the design it was fit on; when the
    scheme standardized its columns, ``beta_original()`` maps back to
    the raw covariate scale using the stored stats.
    """

    method: str  # "MLE" | "AL" | "ALDS"
    beta: np.ndarray
    names: tuple[str, ...]
    loglik: float
    objective: float
    n_outer: int
    n_inner: int
    kkt_residual: float
    spec: ModelSpec
    stats: StandardizationStats | None
    lam: float | None = None
    weights: PenaltyWeights | None = None
    suspect: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def support(self) -> tuple[int, ...]:
        return support_of(self.beta)

    @property
    def n_nonzero(self) -> int:
        return len(self.support)

    def beta_original(self) -> np.ndarray:
        return to_original_scale(self.beta, self.spec, self.stats)
