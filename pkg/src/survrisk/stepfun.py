"""Right-continuous step functions over a shared time grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant, right-continuous function of time.

    ``f(t) = values[k]`` where ``grid[k]`` is the largest grid point with
    ``grid[k] <= t``; before the first grid point ``f(t) = initial``.
    Survival curves use ``initial=1``, cumulative hazards ``initial=0``.
    The function extends right-constant past the last grid point.
    """

    grid: np.ndarray
    values: np.ndarray
    initial: float = 1.0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if grid.size and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if self.grid.size == 0:
            out = np.full(t_arr.shape, float(self.initial))
        else:
            idx = np.searchsorted(self.grid, t_arr, side="right") - 1
            out = np.where(idx < 0, self.initial, self.values[np.maximum(idx, 0)])
        if np.isscalar(t) or t_arr.ndim == 0:
            return float(out)
        return out
