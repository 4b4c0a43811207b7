"""Discretization of the composite likelihood onto a weighted grid.

A scheme joins the data points with one dummy point per grid cell.
Counting weights split each cell's area evenly over the points it
contains, so the weights always sum to the window area exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PpselectError
from .geometry import (
    ModelSpec,
    PointPattern,
    StandardizationStats,
    Window,
    design_matrix,
)
from .io import write_csv

#: sum(weights) must match the window area to this relative tolerance
WEIGHT_TOL = 1e-10

#: a standardized column whose weighted variance falls below this is
#: treated as constant and rejected
VARIANCE_FLOOR = 1e-20


@dataclass(frozen=True)
class QuadratureScheme:
    """Weighted point set discretizing an intensity integral.

    ``response`` holds 1/w at data points and 0 at dummy points, so
    ``response * weights`` is the 0/1 data indicator.
    """

    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    response: np.ndarray
    is_data: np.ndarray
    design: np.ndarray
    spec: ModelSpec
    stats: StandardizationStats | None
    window: Window

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be strictly positive")
        total = float(np.sum(w))
        if abs(total - self.window.area) > WEIGHT_TOL * self.window.area:
            raise ValueError(
                f"weights sum to {total}, window area is {self.window.area}"
            )
        yw = np.asarray(self.response) * w
        if not np.all((np.abs(yw) < 1e-9) | (np.abs(yw - 1.0) < 1e-9)):
            raise ValueError("response * weight must be 0 or 1 at every point")

    @property
    def n_points(self) -> int:
        return self.x.size

    @property
    def n_data(self) -> int:
        return int(np.count_nonzero(self.is_data))

    @property
    def n_columns(self) -> int:
        return self.design.shape[1]

    def integral(self, values) -> float:
        """Approximate the integral of a function sampled at the nodes."""
        return float(np.dot(self.weights, values))


def default_grid(n_data: int) -> tuple[int, int]:
    """Default dummy grid resolution for a pattern of the given size."""
    n = max(10, math.ceil(2.0 * math.sqrt(max(n_data, 0))))
    return n, n


def build_scheme(
    pattern: PointPattern,
    spec: ModelSpec,
    fields: dict,
    n_x: int | None = None,
    n_y: int | None = None,
) -> QuadratureScheme:
    """Build a counting-weight scheme over an n_x by n_y grid.

    Dummy points sit at cell centers; each point in a cell receives
    the cell area divided by the number of points in it.  Data points
    come first in input order, then dummies in row-major order from
    the southwest corner.
    """
    if n_x is None or n_y is None:
        gx, gy = default_grid(pattern.n)
        n_x = gx if n_x is None else n_x
        n_y = gy if n_y is None else n_y
    if n_x < 1 or n_y < 1:
        raise ValueError(f"grid must be at least 1x1, got {n_x}x{n_y}")
    win = pattern.window
    for name, f in fields.items():
        if not f.covers(win):
            raise PpselectError(
                f"raster '{name}' does not cover the window "
                f"[{win.x_min}, {win.x_max}] x [{win.y_min}, {win.y_max}]"
            )
    dx = (win.x_max - win.x_min) / n_x
    dy = (win.y_max - win.y_min) / n_y

    col = np.clip(((pattern.x - win.x_min) / dx).astype(int), 0, n_x - 1)
    row = np.clip(((pattern.y - win.y_min) / dy).astype(int), 0, n_y - 1)
    cell_of_data = row * n_x + col
    data_per_cell = np.bincount(cell_of_data, minlength=n_x * n_y)

    cx = win.x_min + dx * (np.arange(n_x) + 0.5)
    cy = win.y_min + dy * (np.arange(n_y) + 0.5)
    gx, gy = np.meshgrid(cx, cy)  # row-major: southern row first

    x = np.concatenate([pattern.x, gx.ravel()])
    y = np.concatenate([pattern.y, gy.ravel()])
    is_data = np.zeros(x.size, dtype=bool)
    is_data[: pattern.n] = True

    cell_area = dx * dy
    per_point = cell_area / (1.0 + data_per_cell)
    weights = np.concatenate([per_point[cell_of_data], per_point])
    response = np.where(is_data, 1.0 / weights, 0.0)

    Z = design_matrix(x, y, spec, fields)
    stats = None
    if spec.standardize:
        stats = _weighted_stats(Z, weights, spec)
        Z = (Z - stats.mean) / stats.scale

    return QuadratureScheme(
        x=x, y=y, weights=weights, response=response, is_data=is_data,
        design=Z, spec=spec, stats=stats, window=win,
    )


def _weighted_stats(Z: np.ndarray, w: np.ndarray, spec: ModelSpec) -> StandardizationStats:
    """Weight-averaged mean and standard deviation of each column.

    The intercept column keeps (mean 0, scale 1).  A column with no
    variation cannot be standardized and raises an error naming it.
    """
    total = np.sum(w)
    mean = (w @ Z) / total
    var = (w @ (Z - mean) ** 2) / total
    names = spec.column_names
    j0 = spec.intercept_index
    for j, name in enumerate(names):
        if j == j0:
            continue
        if var[j] < VARIANCE_FLOOR:
            raise PpselectError(
                f"design column '{name}' is constant over the window; "
                "it cannot be standardized"
            )
    scale = np.sqrt(var)
    if j0 is not None:
        mean[j0] = 0.0
        scale[j0] = 1.0
    return StandardizationStats(mean=mean, scale=scale)


def export_scheme(scheme: QuadratureScheme, path) -> None:
    """Write the scheme as a CSV table, one row per quadrature point."""
    cols = [
        ("x", scheme.x),
        ("y", scheme.y),
        ("w", scheme.weights),
        ("y_response", scheme.response),
        ("is_data", scheme.is_data.astype(int)),
    ]
    for j, name in enumerate(scheme.spec.column_names):
        cols.append((name, scheme.design[:, j]))
    write_csv(cols, path)
