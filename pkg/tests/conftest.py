"""Shared factories for the test suite.

Everything here is deterministic given a seed, so individual tests can
build small fitting problems without coordinating global state.
"""
import numpy as np
import pytest

from ppselect.geometry import CovariateField, ModelSpec, PointPattern, Window
from ppselect.quadrature import build_scheme


def random_field(rng, window, name, ncols=6, nrows=5):
    """A random piecewise-constant raster exactly covering the window."""
    dx = (window.x_max - window.x_min) / ncols
    dy = (window.y_max - window.y_min) / nrows
    values = rng.normal(size=(nrows, ncols))
    return CovariateField(name, window.x_min, window.y_min, dx, dy, values)


def random_pattern(rng, window, n):
    x = rng.uniform(window.x_min, window.x_max, n)
    y = rng.uniform(window.y_min, window.y_max, n)
    return PointPattern(x, y, window)


def random_scheme(seed, n_cov=2, n_data=40, window=None, standardize=False,
                  n_x=8, n_y=8, interactions=(), ncols=6, nrows=5):
    """A small quadrature scheme over uniform points and random rasters."""
    rng = np.random.default_rng(seed)
    window = window or Window(0.0, 10.0, 0.0, 5.0)
    fields = {
        f"v{i}": random_field(rng, window, f"v{i}", ncols, nrows)
        for i in range(n_cov)
    }
    spec = ModelSpec(covariates=tuple(fields), interactions=interactions,
                     standardize=standardize)
    pattern = random_pattern(rng, window, n_data)
    return build_scheme(pattern, spec, fields, n_x=n_x, n_y=n_y)


@pytest.fixture
def unit_window():
    return Window(0.0, 1.0, 0.0, 1.0)


@pytest.fixture
def small_scheme():
    return random_scheme(3)
