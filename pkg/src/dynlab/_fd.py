"""Tensor-product central finite differences for mixed partials."""

from functools import lru_cache
from itertools import product

import numpy as np

# central stencils: derivative order -> (offsets, weights) for unit step
_STENCILS = {
    0: (np.array([0]), np.array([1.0])),
    1: (np.array([-1, 1]), np.array([-0.5, 0.5])),
    2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2, -1, 1, 2]), np.array([-0.5, 1.0, -1.0, 0.5])),
    4: (np.array([-2, -1, 0, 1, 2]), np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
}

MAX_ORDER = 4


@lru_cache(maxsize=None)
def multi_indices(dim, order):
    """All multi-indices of length ``dim`` summing to ``order``."""
    if dim == 1:
        return ((order,),)
    out = []
    for first in range(order, -1, -1):
        for rest in multi_indices(dim - 1, order - first):
            out.append((first,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def _stencil(alpha):
    offsets, weights = [], []
    for combo in product(*[range(len(_STENCILS[a][0])) for a in alpha]):
        off = [_STENCILS[a][0][c] for a, c in zip(alpha, combo)]
        w = np.prod([_STENCILS[a][1][c] for a, c in zip(alpha, combo)])
        offsets.append(off)
        weights.append(w)
    return np.array(offsets, dtype=float), np.array(weights)


def partial(fun, points, alpha, h):
    """Central-difference estimate of the mixed partial ``alpha`` of ``fun``.

    ``fun`` maps an (N, dim) array to (N,) or (N, k). ``h`` is a scalar or a
    per-axis step vector.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    alpha = tuple(int(a) for a in alpha)
    if max(alpha) > MAX_ORDER:
        raise ValueError(f"derivative order above {MAX_ORDER} per axis")
    h = np.broadcast_to(np.asarray(h, dtype=float), (points.shape[1],))
    offsets, weights = _stencil(alpha)
    n, s = points.shape[0], len(weights)
    shifted = points[None, :, :] + (offsets * h)[:, None, :]
    vals = np.asarray(fun(shifted.reshape(s * n, -1)))
    vals = vals.reshape((s, n) + vals.shape[1:])
    scale = np.prod(h ** np.array(alpha))
    return np.tensordot(weights, vals, axes=(0, 0)) / scale


def partial_richardson(fun, points, alpha, h):
    """Richardson-extrapolated central difference (error O(h^4))."""
    coarse = partial(fun, points, alpha, h)
    fine = partial(fun, points, alpha, np.asarray(h) / 2.0)
    return (4.0 * fine - coarse) / 3.0
