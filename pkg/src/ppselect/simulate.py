"""Point process simulators with exact thinning.

Intensities are log-linear in piecewise-constant covariates, so the
supremum over the window is attained on a finite intersection grid
and rejection sampling introduces no approximation.  Simulators
always evaluate covariates on their raw scale; coefficient vectors
passed here are interpreted on that scale.

Randomness is counter-based and splittable: an :class:`RngSpec` keys
a Philox stream by (seed, stream path), and ``child(i)`` derives the
i-th independent substream, so replicate i's draws never depend on
how many replicates run or in which order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import NumericRangeError
from .geometry import ModelSpec, PointPattern, Window, design_matrix
from .likelihood import ETA_CLAMP

#: parent processes live on the window dilated by this many cluster scales
DILATION_FACTOR = 4.0


@dataclass(frozen=True)
class RngSpec:
    """Seed plus a path of substream indices."""

    seed: int
    stream: tuple[int, ...] = ()

    def child(self, index: int) -> "RngSpec":
        return RngSpec(self.seed, self.stream + (int(index),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(seq))


def intersection_grid(window: Window, fields: dict):
    """Cell edges of the common refinement of all rasters in the window.

    Returns (x_edges, y_edges); every raster in ``fields`` is constant
    on each cell of this grid.
    """
    xs = [np.array([window.x_min, window.x_max])]
    ys = [np.array([window.y_min, window.y_max])]
    for f in fields.values():
        xs.append(f.x0 + f.dx * np.arange(f.ncols + 1))
        ys.append(f.y0 + f.dy * np.arange(f.nrows + 1))
    x_edges = np.unique(np.concatenate(xs))
    y_edges = np.unique(np.concatenate(ys))
    x_edges = x_edges[(x_edges >= window.x_min) & (x_edges <= window.x_max)]
    y_edges = y_edges[(y_edges >= window.y_min) & (y_edges <= window.y_max)]
    return x_edges, y_edges


def intensity_on_grid(window: Window, spec: ModelSpec, fields: dict, beta):
    """Exact cellwise intensity: (x_edges, y_edges, rho) with rho[i, j]
    the value on cell (row i, column j)."""
    beta = np.asarray(beta, dtype=float)
    x_edges, y_edges = intersection_grid(window, fields)
    cx = 0.5 * (x_edges[:-1] + x_edges[1:])
    cy = 0.5 * (y_edges[:-1] + y_edges[1:])
    gx, gy = np.meshgrid(cx, cy)
    Z = design_matrix(gx.ravel(), gy.ravel(), spec, fields)
    eta = Z @ beta
    if np.any(eta > ETA_CLAMP):
        raise NumericRangeError(
            f"log intensity reaches {np.max(eta):.1f}; exp would overflow"
        )
    return x_edges, y_edges, np.exp(eta).reshape(cy.size, cx.size)


def expected_count(window: Window, spec: ModelSpec, fields: dict, beta) -> float:
    """Exact integral of the intensity over the window."""
    x_edges, y_edges, rho = intensity_on_grid(window, spec, fields, beta)
    areas = np.outer(np.diff(y_edges), np.diff(x_edges))
    return float(np.sum(areas * rho))


def max_intensity(window: Window, spec: ModelSpec, fields: dict, beta) -> float:
    """Exact supremum of the intensity over the window."""
    _, _, rho = intensity_on_grid(window, spec, fields, beta)
    return float(np.max(rho))


def _eta_at(x, y, spec, fields, beta):
    Z = design_matrix(x, y, spec, fields)
    return Z @ np.asarray(beta, dtype=float)


def sim_poisson(window: Window, spec: ModelSpec, fields: dict, beta,
                rng: RngSpec) -> PointPattern:
    """Inhomogeneous Poisson sample by thinning a dominating
    homogeneous process at the exact intensity maximum."""
    rho_max = max_intensity(window, spec, fields, beta)
    gen = rng.generator()
    n = gen.poisson(rho_max * window.area)
    x = gen.uniform(window.x_min, window.x_max, n)
    y = gen.uniform(window.y_min, window.y_max, n)
    u = gen.uniform(0.0, 1.0, n)
    if n:
        keep = u < np.exp(_eta_at(x, y, spec, fields, beta)) / rho_max
    else:
        keep = np.zeros(0, dtype=bool)
    return PointPattern(x[keep], y[keep], window)


def sim_thomas(window: Window, spec: ModelSpec, fields: dict, beta,
               kappa: float, gamma: float, rng: RngSpec) -> PointPattern:
    """Clustered sample: Poisson parents, Gaussian-displaced offspring.

    Parents are homogeneous with rate ``kappa`` on the window dilated
    by 4*gamma.  Given a parent at c, offspring form a Poisson process
    with intensity exp(beta'z(u)) * k(u - c; gamma) / kappa, realized
    by drawing a dominating count from the Gaussian mass inside the
    window, placing points by inverse-CDF truncated Gaussians per
    axis, and thinning at the exact intensity maximum.  First moment:
    E N(B) = integral of exp(beta'z) over B, up to the mass beyond the
    4*gamma dilation.
    """
    if kappa <= 0 or gamma <= 0:
        raise ValueError("kappa and gamma must be positive")
    rho_max = max_intensity(window, spec, fields, beta)
    gen = rng.generator()

    dil = window.dilate(DILATION_FACTOR * gamma)
    n_parents = gen.poisson(kappa * dil.area)
    px = gen.uniform(dil.x_min, dil.x_max, n_parents)
    py = gen.uniform(dil.y_min, dil.y_max, n_parents)

    # Gaussian mass of the window seen from each parent, per axis.
    ax_lo = ndtr((window.x_min - px) / gamma)
    ax_hi = ndtr((window.x_max - px) / gamma)
    ay_lo = ndtr((window.y_min - py) / gamma)
    ay_hi = ndtr((window.y_max - py) / gamma)
    mass = (ax_hi - ax_lo) * (ay_hi - ay_lo)

    counts = gen.poisson(rho_max / kappa * mass)
    total = int(np.sum(counts))
    u1 = gen.uniform(0.0, 1.0, total)
    u2 = gen.uniform(0.0, 1.0, total)
    u3 = gen.uniform(0.0, 1.0, total)
    if total == 0:
        return PointPattern(np.zeros(0), np.zeros(0), window)

    cx = np.repeat(px, counts)
    cy = np.repeat(py, counts)
    qx = np.repeat(ax_lo, counts) + u1 * np.repeat(ax_hi - ax_lo, counts)
    qy = np.repeat(ay_lo, counts) + u2 * np.repeat(ay_hi - ay_lo, counts)
    x = cx + gamma * ndtri(qx)
    y = cy + gamma * ndtri(qy)
    # inverse-CDF values land inside the window up to roundoff
    x = np.clip(x, window.x_min, window.x_max)
    y = np.clip(y, window.y_min, window.y_max)

    keep = u3 < np.exp(_eta_at(x, y, spec, fields, beta)) / rho_max
    return PointPattern(x[keep], y[keep], window)


def tune_intercept(window: Window, spec: ModelSpec, fields: dict,
                   beta_rest: np.ndarray, target: float,
                   tol_rel: float = 1e-6, max_iter: int = 200) -> np.ndarray:
    """Set the intercept by bisection so the exact expected count hits
    ``target`` to relative tolerance ``tol_rel``."""
    if not spec.include_intercept:
        raise ValueError("the model has no intercept to tune")
    if target <= 0:
        raise ValueError("target expected count must be positive")
    beta = np.asarray(beta_rest, dtype=float).copy()
    j = spec.intercept_index

    def count_at(b):
        beta[j] = b
        return expected_count(window, spec, fields, beta)

    lo, hi = -10.0, 10.0
    while count_at(lo) > target and lo > -600:
        lo -= 20.0
    while count_at(hi) < target and hi < 600:
        hi += 20.0
    if count_at(lo) > target or count_at(hi) < target:
        raise NumericRangeError("could not bracket the target count")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        value = count_at(mid)
        if abs(value - target) <= tol_rel * target:
            beta[j] = mid
            return beta
        if value < target:
            lo = mid
        else:
            hi = mid
    raise NumericRangeError(
        f"intercept bisection did not reach {tol_rel:.0e} in {max_iter} steps"
    )
