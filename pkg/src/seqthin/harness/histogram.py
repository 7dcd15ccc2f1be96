"""Kernel-smoothed histogram of selected scalar points, for external plotting."""
from __future__ import annotations

import numpy as np


def epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def emit_histogram(points, bandwidth=None, n_grid=8001, grid=None, path=None):
    """Density table ``(x, density)`` of ``points``.

    The default bandwidth is 1/1000 of the range of ``points``.  When
    ``path`` is given, writes two comma-separated columns with a header.
    """
    x = np.asarray(points, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot smooth an empty selection")
    if bandwidth is None:
        span = float(x.max() - x.min())
        if span == 0.0:
            raise ValueError("all points coincide; give an explicit bandwidth")
        bandwidth = span / 1000.0
    h = float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if grid is None:
        grid = np.linspace(x.min() - h, x.max() + h, int(n_grid))
    grid = np.asarray(grid, dtype=float)
    xs = np.sort(x)
    dens = np.empty_like(grid)
    # only points within h of each grid node contribute
    lo = np.searchsorted(xs, grid - h, side="left")
    hi = np.searchsorted(xs, grid + h, side="right")
    for j, (a, b) in enumerate(zip(lo, hi)):
        dens[j] = epanechnikov((grid[j] - xs[a:b]) / h).sum()
    dens /= x.size * h
    if path is not None:
        with open(path, "w") as fh:
            fh.write("x,density\n")
            for g, v in zip(grid, dens):
                fh.write(f"{g!r},{v!r}\n")
    return grid, dens
