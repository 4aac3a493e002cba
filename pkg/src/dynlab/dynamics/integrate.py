"""Fixed-step RK4 for the suspension flow with variational equations and exact gluing."""

from dataclasses import dataclass

import numpy as np


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowOptions:
    h: float = 1e-3
    jacobian: bool = True
    error_budget: float = None  # per-step local error bound (step-doubling estimate)


def _steps(t, h):
    n = int(round(abs(t) / h))
    if n == 0 or abs(n * h - abs(t)) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"step {h} does not divide t = {t}")
    return n


def _rk4(X, z, J, h):
    def rhs(zz, JJ):
        dz = X(zz)
        if JJ is None:
            return dz, None
        return dz, np.einsum("nij,njk->nik", X.jacobian(zz), JJ)

    k1, K1 = rhs(z, J)
    k2, K2 = rhs(z + 0.5 * h * k1, None if J is None else J + 0.5 * h * K1)
    k3, K3 = rhs(z + 0.5 * h * k2, None if J is None else J + 0.5 * h * K2)
    k4, K4 = rhs(z + h * k3, None if J is None else J + h * K3)
    zn = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    Jn = None if J is None else J + h / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)
    return zn, Jn


def glue(z, J, A):
    """Apply (y, tau) ~ (A y, tau - 1) wherever tau left [0, 1); J picks up blockdiag(I, A, 1)."""
    M, Minv = A.matrix.astype(float), A.matrix_inv.astype(float)
    for _ in range(4):
        hi, lo = z[:, -1] >= 1.0, z[:, -1] < 0.0
        if not (np.any(hi) or np.any(lo)):
            break
        for mask, P, shift in ((hi, M, -1.0), (lo, Minv, 1.0)):
            if np.any(mask):
                z[mask, 2:-1] = np.mod(z[mask, 2:-1] @ P.T, 1.0)
                z[mask, -1] += shift
                if J is not None:
                    J[mask, 2:-1, :] = np.einsum("ij,njk->nik", P, J[mask, 2:-1, :])
    return z, J


def flow_map(X, t, z, A, opts=None):
    """Time-t map of X (negative t integrates backwards).

    Returns (z_t, Jacobian) for an (N, m) batch, or (z_t, None) when the
    Jacobian is switched off.
    """
    opts = opts or FlowOptions()
    z = np.array(np.atleast_2d(z), dtype=float)
    n = _steps(t, opts.h)
    h = opts.h if t > 0 else -opts.h
    J = np.repeat(np.eye(z.shape[1])[None], len(z), axis=0) if opts.jacobian else None
    for _ in range(n):
        if opts.error_budget is not None:
            zf, _ = _rk4(X, z, None, h)
            zh, _ = _rk4(X, z, None, h / 2)
            zh, _ = _rk4(X, zh, None, h / 2)
            err = np.max(np.abs(zf[:, :2] - zh[:, :2])) / 15.0
            if err > opts.error_budget:
                raise IntegrationError(f"local error {err:.3e} exceeds budget {opts.error_budget:.3e}")
        z, J = _rk4(X, z, J, h)
        z, J = glue(z, J, A)
    return z, J


def tube_flow(z, t, A):
    """Exact time-t map where X == d/dtau: (x, y, tau) -> (x, A^g y, frac(tau + t))."""
    z = np.array(np.atleast_2d(z), dtype=float)
    z[:, -1] += t
    z, _ = glue(z, None, A) if abs(t) <= 3 else _glue_many(z, A)
    return z


def _glue_many(z, A):
    from dynlab.geometry import normalize_suspension

    y, tau = normalize_suspension(z[:, 2:-1], z[:, -1], A)
    z[:, 2:-1], z[:, -1] = y, tau
    return z, None
