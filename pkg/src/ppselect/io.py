"""Plain-text readers and writers for patterns, rasters and tables.

Floating point values are written with ``repr`` so that a write/read
round trip reproduces every value bit for bit.
"""
from __future__ import annotations

import os

import numpy as np

from .errors import PpselectError
from .geometry import CovariateField, PointPattern, Window


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _read_lines(path) -> list[str]:
    try:
        with open(path) as fh:
            return [ln.rstrip("\n") for ln in fh]
    except FileNotFoundError:
        raise PpselectError(f"no such file: {path}") from None


def write_csv(columns, path) -> None:
    """Write a table given as an ordered mapping/list of (name, values)."""
    if isinstance(columns, dict):
        columns = list(columns.items())
    names = [name for name, _ in columns]
    series = [list(vals) for _, vals in columns]
    if series and any(len(s) != len(series[0]) for s in series):
        raise ValueError("all columns must have the same length")
    n = len(series[0]) if series else 0
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join(_fmt(s[i]) for s in series))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> dict[str, list[str]]:
    """Read a header+rows CSV into a dict of string columns."""
    lines = [ln for ln in _read_lines(path) if ln.strip()]
    if not lines:
        raise PpselectError(f"empty table in {path}")
    names = lines[0].split(",")
    cols = {name: [] for name in names}
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(names):
            raise PpselectError(f"ragged row in {path}: {ln!r}")
        for name, part in zip(names, parts):
            cols[name].append(part)
    return cols


def write_pattern(pattern: PointPattern, path, metadata: dict | None = None) -> None:
    """Write a point pattern with its window recorded in a comment line."""
    w = pattern.window
    lines = [f"# window {_fmt(w.x_min)} {_fmt(w.x_max)} {_fmt(w.y_min)} {_fmt(w.y_max)}"]
    for key, value in (metadata or {}).items():
        lines.append(f"# {key} {value}")
    lines.append("x,y")
    for xi, yi in zip(pattern.x, pattern.y):
        lines.append(f"{_fmt(xi)},{_fmt(yi)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pattern(path) -> PointPattern:
    """Read a pattern written by :func:`write_pattern`."""
    if not os.path.exists(path):
        raise PpselectError(f"pattern file not found: {path}")
    window = None
    rows = []
    header_seen = False
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith("#"):
                parts = ln[1:].split()
                if parts and parts[0] == "window":
                    if len(parts) != 5:
                        raise PpselectError(
                            f"malformed window comment in {path}: {ln!r}"
                        )
                    window = Window(*(float(p) for p in parts[1:]))
                continue
            if not header_seen:
                if ln.replace(" ", "") != "x,y":
                    raise PpselectError(f"expected 'x,y' header in {path}, got {ln!r}")
                header_seen = True
                continue
            parts = ln.split(",")
            if len(parts) != 2:
                raise PpselectError(f"malformed point row in {path}: {ln!r}")
            rows.append((float(parts[0]), float(parts[1])))
    if window is None:
        raise PpselectError(f"missing '# window ...' comment in {path}")
    if not header_seen:
        raise PpselectError(f"missing 'x,y' header in {path}")
    xy = np.asarray(rows, dtype=float).reshape(-1, 2)
    return PointPattern(xy[:, 0], xy[:, 1], window)


def write_raster(field: CovariateField, path) -> None:
    """Write a raster: one header line, then rows from south to north."""
    lines = [
        " ".join(
            [str(field.ncols), str(field.nrows)]
            + [_fmt(v) for v in (field.x0, field.y0, field.dx, field.dy)]
        )
    ]
    for r in range(field.nrows):
        lines.append(" ".join(_fmt(v) for v in field.values[r]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_raster(path, name: str | None = None) -> CovariateField:
    """Read a raster written by :func:`write_raster`.

    The covariate name defaults to the file name without extension.
    """
    if not os.path.exists(path):
        raise PpselectError(f"raster file not found: {path}")
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise PpselectError(f"empty raster file: {path}")
    head = lines[0].split()
    if len(head) != 6:
        raise PpselectError(
            f"raster header must be 'ncols nrows x0 y0 dx dy', got {lines[0]!r}"
        )
    ncols, nrows = int(head[0]), int(head[1])
    x0, y0, dx, dy = (float(v) for v in head[2:])
    if len(lines) - 1 != nrows:
        raise PpselectError(
            f"raster {path} declares {nrows} rows but has {len(lines) - 1}"
        )
    values = np.empty((nrows, ncols), dtype=float)
    for r in range(nrows):
        parts = lines[1 + r].split()
        if len(parts) != ncols:
            raise PpselectError(
                f"raster {path} row {r} has {len(parts)} values, expected {ncols}"
            )
        values[r] = [float(p) for p in parts]
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    return CovariateField(name, x0, y0, dx, dy, values)
