import numpy as np


def bracket(axis, x):
    """Lower node index and fractional weight of ``x`` on a sorted axis, clamped at the edges."""
    axis = np.asarray(axis, dtype=float)
    x = np.clip(np.asarray(x, dtype=float), axis[0], axis[-1])
    i = np.clip(np.searchsorted(axis, x, side="right") - 1, 0, len(axis) - 2)
    w = (x - axis[i]) / (axis[i + 1] - axis[i])
    return i, w


def bilinear(ax0, ax1, grid, x0, x1):
    """Clamped bilinear interpolation of ``grid[ax0, ax1]``."""
    return bilinear_many(ax0, ax1, (grid,), x0, x1)[0]


def bilinear_many(ax0, ax1, grids, x0, x1):
    """:func:`bilinear` over several grids sharing the same axes and query points."""
    i, wi = bracket(ax0, x0)
    j, wj = bracket(ax1, x1)
    return [_blend(g, i, j, wi, wj) for g in grids]


def _blend(grid, i, j, wi, wj):
    g00 = grid[i, j]
    g01 = grid[i, j + 1]
    g10 = grid[i + 1, j]
    g11 = grid[i + 1, j + 1]
    return (1 - wi) * ((1 - wj) * g00 + wj * g01) + wi * ((1 - wj) * g10 + wj * g11)
