"""Finite-horizon stable/center/unstable splitting by forward and backward QR propagation."""

import numpy as np

from dynlab.geometry import SplittingEstimate


def _orbit(step, z, n):
    for _ in range(n):
        z = step(z)[0]
    return z


def _pushed_frame(step, z_start, n, m, rng):
    """Propagate a random orthonormal frame n steps from z_start; returns (Q at the end, log-rates, end point)."""
    z = np.atleast_2d(z_start)
    Q = np.linalg.qr(rng.normal(size=(m, m)))[0][None]
    logs = np.zeros(m)
    for _ in range(n):
        z, D = step(z)
        Q, R = np.linalg.qr(np.einsum("nij,njk->nik", D, Q))
        d = np.diagonal(R, axis1=1, axis2=2)[0]
        logs += np.log(np.abs(d))
        Q = Q * np.sign(d)[None, None, :]
    return Q[0], logs / n, z


def _center_vector(system, z):
    if hasattr(system, "X"):
        v = system.X(np.atleast_2d(z))[0]
    else:  # exact tube maps: X = d/dtau
        v = np.zeros(np.atleast_2d(z).shape[1])
        v[-1] = 1.0
    return v / np.linalg.norm(v)


def _growth_rate(step, z, v, n):
    z = np.atleast_2d(z)
    log_g = 0.0
    for _ in range(n):
        z, D = step(z)
        v = D[0] @ v
        nv = np.linalg.norm(v)
        log_g += np.log(nv)
        v = v / nv
    return log_g / n


def estimate_splitting(system, z, horizon, rate_tol=1e-3, rel_tol=0.1, seed=0):
    """Es/Ec/Eu at z from a ``system`` exposing step and inverse_step.

    Eu: frame pushed forward from the point ``horizon`` steps back; Es: the same with the
    inverse map from ``horizon`` steps ahead. A rate counts as hyperbolic above
    max(rate_tol, rel_tol * top rate); finite-horizon QR leaves O(1/horizon) residue on
    neutral directions. The remaining non-flow directions go to En.
    Rates are per-step multipliers (lam, lam', mu', mu).
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    z = np.atleast_2d(np.asarray(z, dtype=float))
    m = z.shape[1]
    flags = []
    rng = np.random.default_rng(seed)
    z_back = _orbit(system.inverse_step, z, horizon)
    Qu, rates_u, _ = _pushed_frame(system.step, z_back, horizon, m, rng)
    z_fwd = _orbit(system.step, z, horizon)
    Qs, rates_s, _ = _pushed_frame(system.inverse_step, z_fwd, horizon, m, rng)
    thr = max(rate_tol, rel_tol * max(rates_u[0], rates_s[0]))
    n_u = int(np.sum(rates_u > thr))
    n_s = int(np.sum(rates_s > thr))
    Eu, Es = Qu[:, :n_u], Qs[:, :n_s]
    ec = _center_vector(system, z)
    Ec = ec[:, None]
    basis = np.column_stack([Es, Ec, Eu])
    # neutral complement
    P = np.eye(m) - basis @ np.linalg.pinv(basis)
    U, sv, _ = np.linalg.svd(P)
    n_n = m - basis.shape[1]
    En = U[:, :n_n] if n_n > 0 else np.zeros((m, 0))
    if n_n:
        flags.append(f"{n_n} neutral directions outside Es + Ec + Eu")
    mu_p = lam_p = float(np.exp(_growth_rate(system.step, z, ec, horizon)))
    mu = float(np.exp(rates_u[n_u - 1])) if n_u else 1.0
    lam = float(np.exp(-rates_s[n_s - 1])) if n_s else 1.0
    hyper = np.concatenate([rates_u[:n_u], rates_s[:n_s]])
    if len(hyper) and np.min(hyper) < 2 * thr:
        flags.append("horizon too short to resolve the rate gap; uncertainty widened")
    if n_u == 0 or n_s == 0:
        flags.append("no hyperbolic directions resolved")
    return SplittingEstimate(Es, Ec, Eu, lam, lam_p, mu_p, mu, En, flags)
