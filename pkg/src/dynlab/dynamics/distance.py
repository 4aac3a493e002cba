"""Finite-difference C^r distance of a map to the identity."""

from dataclasses import dataclass

import numpy as np

from dynlab._fd import multi_indices, partial_richardson

MIN_GRID = 8


@dataclass
class CrDistance:
    value: float
    per_order: list  # sup of |d^alpha (f - id)| over |alpha| = n, n = 0..r

    def __float__(self):
        return self.value


def cr_distance_to_identity(fmap, r, grid, h=1e-3, periodic=None):
    """max over |alpha| <= r of sup_grid |d^alpha (f - id)|.

    ``h`` may be a per-axis vector (useful when one axis is rescaled). Coordinates
    flagged in ``periodic`` have their displacement wrapped to [-1/2, 1/2).
    """
    if r > 3 or r < 0:
        raise ValueError("r must lie in 0..3")
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if len(grid) < MIN_GRID:
        raise ValueError(f"grid too coarse: need at least {MIN_GRID} points")
    dim = grid.shape[1]
    per = np.zeros(dim, dtype=bool) if periodic is None else np.asarray(periodic, dtype=bool)

    def disp(x):
        d = fmap(x) - x
        d[:, per] -= np.round(d[:, per])
        return d

    orders = []
    for n in range(r + 1):
        if n == 0:
            orders.append(float(np.max(np.abs(disp(grid)))))
            continue
        worst = 0.0
        for alpha in multi_indices(dim, n):
            worst = max(worst, float(np.max(np.abs(partial_richardson(disp, grid, alpha, h)))))
        orders.append(worst)
    return CrDistance(max(orders), orders)
