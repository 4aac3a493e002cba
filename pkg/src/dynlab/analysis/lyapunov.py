"""Benettin/QR Lyapunov spectra."""

from dataclasses import dataclass, field

import numpy as np


class FrameDegeneracy(RuntimeError):
    pass


@dataclass
class TangentPropagation:
    """Orbit samples, the current orthonormal frame and the per-renormalization log ledger."""

    orbit: np.ndarray
    frame: np.ndarray
    ledger: np.ndarray  # (n_renorm, N, k) log |R_ii|
    log_det: np.ndarray  # (N,) accumulated log |det Df|


@dataclass
class LyapunovReport:
    exponents: np.ndarray  # (k,) ensemble mean, descending
    per_orbit: np.ndarray  # (N, k)
    trace: np.ndarray  # (n_checkpoints, k) running ensemble means
    n_steps: int
    seed: int
    mean_log_det: float  # orbit average of log |det Df| per step
    cauchy_tail: float
    extra: dict = field(default_factory=dict)

    @property
    def exponent_sum(self):
        return float(np.sum(self.exponents))

    def to_dict(self):
        return {
            "exponents": self.exponents.tolist(),
            "n_steps": self.n_steps,
            "seed": self.seed,
            "mean_log_det": self.mean_log_det,
            "exponent_sum": self.exponent_sum,
            "cauchy_tail": self.cauchy_tail,
            "n_orbits": int(self.per_orbit.shape[0]),
            **self.extra,
        }


def propagate(system, z0, n_steps, k_vectors, seed, renorm_every=10, record_orbit=False):
    """QR-renormalized tangent propagation for an ensemble of initial points."""
    z = np.array(np.atleast_2d(z0), dtype=float)
    N, m = z.shape
    if k_vectors > m:
        raise ValueError("k_vectors must not exceed the dimension")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(m, m)))
    Q = np.repeat(Q[None, :, :k_vectors], N, axis=0)
    ledger, orbit = [], [z.copy()] if record_orbit else None
    log_det = np.zeros(N)
    for i in range(1, n_steps + 1):
        z, D = system.step(z)
        Q = np.einsum("nij,njk->nik", D, Q)
        if k_vectors == m:
            log_det += np.log(np.abs(np.linalg.det(D)))
        if record_orbit:
            orbit.append(z.copy())
        if i % renorm_every == 0 or i == n_steps:
            Q, R = np.linalg.qr(Q)
            d = np.abs(np.diagonal(R, axis1=1, axis2=2))
            if not np.all(np.isfinite(d)) or np.any(d <= 1e-300):
                raise FrameDegeneracy(f"tangent frame lost rank at step {i}")
            ledger.append(np.log(d))
    return TangentPropagation(np.array(orbit) if record_orbit else z, Q, np.array(ledger), log_det)


def lyapunov_spectrum(system, z0, n_steps, k_vectors, seed, renorm_every=10):
    """Top-k exponents per step; ``z0`` may be one point or an ensemble."""
    if n_steps < 1000:
        raise ValueError("n_steps must be at least 1000")
    tp = propagate(system, z0, n_steps, k_vectors, seed, renorm_every)
    cum = np.cumsum(tp.ledger, axis=0)  # (n_renorm, N, k)
    steps = np.minimum(np.arange(1, len(cum) + 1) * renorm_every, n_steps)
    running = cum / steps[:, None, None]
    per_orbit = running[-1]
    order = np.argsort(-per_orbit.mean(axis=0))
    per_orbit = per_orbit[:, order]
    trace = running.mean(axis=1)[:, order]
    tail = trace[int(0.9 * len(trace)):]
    cauchy = float(np.max(np.abs(tail - tail[-1]))) if len(tail) else 0.0
    return LyapunovReport(
        per_orbit.mean(axis=0), per_orbit, trace, n_steps, seed, float(tp.log_det.mean() / n_steps), cauchy
    )
