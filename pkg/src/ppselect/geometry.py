"""Windows, point patterns, raster covariates and design matrices.

Everything here is two dimensional: windows are axis-aligned
rectangles and covariates are piecewise-constant rasters whose row 0
is the southernmost row.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PpselectError


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangular observation window."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                "window must have positive extent, got "
                f"[{self.x_min}, {self.x_max}] x [{self.y_min}, {self.y_max}]"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, x, y):
        """Boundary-inclusive membership test, vectorized."""
        x = np.asarray(x)
        y = np.asarray(y)
        return (
            (x >= self.x_min)
            & (x <= self.x_max)
            & (y >= self.y_min)
            & (y <= self.y_max)
        )

    def dilate(self, margin: float) -> "Window":
        """Window grown by ``margin`` on every side."""
        if margin < 0:
            raise ValueError("margin must be nonnegative")
        return Window(
            self.x_min - margin,
            self.x_max + margin,
            self.y_min - margin,
            self.y_max + margin,
        )


@dataclass(frozen=True)
class PointPattern:
    """A finite set of points observed inside a window.

    Points on the window boundary count as inside.
    """

    x: np.ndarray
    y: np.ndarray
    window: Window

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("point coordinates must be finite")
        inside = self.window.contains(x, y)
        if not np.all(inside):
            k = int(np.argmin(inside))
            raise ValueError(
                f"point ({x[k]}, {y[k]}) lies outside the window"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class CovariateField:
    """Piecewise-constant raster covariate.

    ``values`` has shape (nrows, ncols); row 0 is the southernmost
    row.  The value at a point is the value of the cell containing it,
    with points on the shared edge of two cells assigned to the cell
    on the greater side (top/right edges of the raster fold into the
    last cell).
    """

    name: str
    x0: float
    y0: float
    dx: float
    dy: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("cell sizes dx, dy must be positive")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"raster '{self.name}' contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    @property
    def x_max(self) -> float:
        return self.x0 + self.ncols * self.dx

    @property
    def y_max(self) -> float:
        return self.y0 + self.nrows * self.dy

    def value_at(self, x, y):
        """Raster value at each point; errors if any point is off the raster."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        eps = 1e-9 * max(self.dx, self.dy)
        off = (
            (x < self.x0 - eps)
            | (x > self.x_max + eps)
            | (y < self.y0 - eps)
            | (y > self.y_max + eps)
        )
        if np.any(off):
            k = int(np.argmax(off))
            raise ValueError(
                f"point ({x[k]}, {y[k]}) is outside raster '{self.name}' "
                f"[{self.x0}, {self.x_max}] x [{self.y0}, {self.y_max}]"
            )
        col = np.clip(np.floor((x - self.x0) / self.dx).astype(int), 0, self.ncols - 1)
        row = np.clip(np.floor((y - self.y0) / self.dy).astype(int), 0, self.nrows - 1)
        return self.values[row, col]

    def covers(self, window: Window, tol: float = 1e-9) -> bool:
        return (
            self.x0 <= window.x_min + tol
            and self.x_max >= window.x_max - tol
            and self.y0 <= window.y_min + tol
            and self.y_max >= window.y_max - tol
        )


INTERCEPT_NAME = "intercept"


@dataclass(frozen=True)
class ModelSpec:
    """Names the columns of a log-linear intensity model.

    Columns are ordered: intercept (when present), covariates in the
    listed order, then interaction products in the listed order.
    """

    covariates: tuple[str, ...]
    interactions: tuple[tuple[str, str], ...] = ()
    include_intercept: bool = True
    standardize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(
            self, "interactions", tuple(tuple(pair) for pair in self.interactions)
        )
        seen = set()
        for name in self.covariates:
            if name in seen:
                raise ValueError(f"duplicate covariate '{name}'")
            seen.add(name)
        for a, b in self.interactions:
            if a not in seen or b not in seen:
                raise ValueError(f"interaction ({a}, {b}) names an unknown covariate")

    @property
    def column_names(self) -> tuple[str, ...]:
        names = []
        if self.include_intercept:
            names.append(INTERCEPT_NAME)
        names.extend(self.covariates)
        names.extend(f"{a}:{b}" for a, b in self.interactions)
        return tuple(names)

    @property
    def n_columns(self) -> int:
        return (
            int(self.include_intercept)
            + len(self.covariates)
            + len(self.interactions)
        )

    @property
    def intercept_index(self) -> int | None:
        return 0 if self.include_intercept else None


@dataclass(frozen=True)
class StandardizationStats:
    """Per-column location/scale applied to a design matrix.

    The intercept column, when present, keeps mean 0 and scale 1 so
    that it passes through untouched.
    """

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        s = np.asarray(self.scale, dtype=float)
        if m.shape != s.shape or m.ndim != 1:
            raise ValueError("mean and scale must be 1-d arrays of equal length")
        if np.any(s <= 0):
            raise ValueError("scales must be strictly positive")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "scale", s)


@dataclass(frozen=True)
class Coefficients:
    """A coefficient vector labelled by design column names."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != len(self.names):
            raise ValueError("values and names must have the same length")
        if not np.all(np.isfinite(v)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", tuple(self.names))

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def _raw_design(x, y, spec: ModelSpec, fields: dict):
    """Unstandardized design matrix at the given points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    missing = [c for c in spec.covariates if c not in fields]
    if missing:
        raise PpselectError(f"no raster supplied for covariate(s) {missing}")
    cols = []
    if spec.include_intercept:
        cols.append(np.ones_like(x))
    values = {c: fields[c].value_at(x, y) for c in spec.covariates}
    cols.extend(values[c] for c in spec.covariates)
    cols.extend(values[a] * values[b] for a, b in spec.interactions)
    return np.column_stack(cols)


def design_matrix(x, y, spec: ModelSpec, fields: dict,
                  stats: StandardizationStats | None = None) -> np.ndarray:
    """Design matrix with one row per point.

    Column order follows ``spec.column_names``.  When ``stats`` is
    given, each non-intercept column is shifted and scaled by it.
    """
    Z = _raw_design(x, y, spec, fields)
    if stats is not None:
        if stats.mean.size != Z.shape[1]:
            raise ValueError("standardization stats do not match the design")
        Z = (Z - stats.mean) / stats.scale
    return Z


def design_row(x, y, spec: ModelSpec, fields: dict,
               stats: StandardizationStats | None = None) -> np.ndarray:
    """Single design row at the point (x, y)."""
    return design_matrix(x, y, spec, fields, stats)[0]


def to_original_scale(beta: np.ndarray, spec: ModelSpec,
                      stats: StandardizationStats | None) -> np.ndarray:
    """Map coefficients fit on the standardized design back to raw scale.

    With z_std = (z - m) / s the linear predictor satisfies
    beta' z_std = (beta / s)' z + const, so slopes divide by their
    scale and the intercept absorbs -sum(beta_j m_j / s_j).
    """
    beta = np.asarray(beta, dtype=float)
    if stats is None:
        return beta.copy()
    out = beta / stats.scale
    if spec.include_intercept:
        j = spec.intercept_index
        shift = np.sum(np.delete(beta * stats.mean / stats.scale, j))
        out[j] = beta[j] - shift
    return out
