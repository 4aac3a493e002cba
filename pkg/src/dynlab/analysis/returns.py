"""First returns, entry refinement for flows, and the Kac check."""

from dataclasses import dataclass

import numpy as np


@dataclass
class ReturnSample:
    z: np.ndarray  # return points (meaningless where censored)
    steps: np.ndarray  # first-return step counts (max_iter + 1 where censored)
    censored: np.ndarray

    @property
    def censored_fraction(self):
        return float(np.mean(self.censored)) if len(self.censored) else 0.0


def first_return(step, in_set, z, max_iter):
    """Vectorized first re-entry under ``step`` (a map on batches of points).

    ``step`` returns either the image or an (image, jacobian) pair.
    """
    z = np.array(np.atleast_2d(z), dtype=float)
    out = z.copy()
    steps = np.full(len(z), max_iter + 1, dtype=np.int64)
    active = np.arange(len(z))
    cur = z.copy()
    for n in range(1, max_iter + 1):
        res = step(cur)
        cur = res[0] if isinstance(res, tuple) else res
        hit = in_set(cur)
        if np.any(hit):
            out[active[hit]] = cur[hit]
            steps[active[hit]] = n
            active, cur = active[~hit], cur[~hit]
        if len(active) == 0:
            break
    censored = steps > max_iter
    return ReturnSample(out, steps, censored)


def refine_entry_time(flow, in_set, z_prev, dt, tol=1e-10, max_bisect=60):
    """Bisection for the first s in (0, dt] with flow(z_prev, s) in the set.

    Assumes the set is entered once on the interval (valid for short ``dt``).
    """
    z_prev = np.atleast_2d(z_prev)
    lo = np.zeros(len(z_prev))
    hi = np.full(len(z_prev), float(dt))
    for _ in range(max_bisect):
        if np.max(hi - lo) < tol:
            break
        mid = 0.5 * (lo + hi)
        inside = np.array([in_set(flow(z_prev[i : i + 1], mid[i]))[0] for i in range(len(z_prev))])
        hi = np.where(inside, mid, hi)
        lo = np.where(inside, lo, mid)
    return hi


@dataclass
class KacReport:
    mean_return: float
    stderr: float
    measure: float  # vol(set) / vol(space)
    kac_ratio: float  # mean_return * measure, should be 1
    censored_fraction: float
    n_samples: int

    @property
    def passed(self):
        return 0.95 <= self.kac_ratio <= 1.05 and self.censored_fraction < 0.01

    def to_dict(self):
        return {**self.__dict__, "pass": self.passed}


def kac_check(step, in_set, sampler, measure, n_samples, seed, max_factor=100):
    """Mean first-return time times the measure of the set (Kac: equals 1 when ergodic)."""
    rng = np.random.default_rng(seed)
    z = sampler(rng, n_samples)
    max_iter = int(np.ceil(max_factor / measure))
    rs = first_return(step, in_set, z, max_iter)
    ok = ~rs.censored
    times = rs.steps[ok].astype(float)
    mean = float(times.mean())
    se = float(times.std(ddof=1) / np.sqrt(len(times)))
    return KacReport(mean, se, measure, mean * measure, rs.censored_fraction, n_samples)


def torus_disk_testbed(center, radius):
    """(in_set, sampler, measure) for a round disk on T^2."""
    center = np.asarray(center, dtype=float)

    def in_set(y):
        d = y - center
        d -= np.round(d)
        return np.sum(d**2, axis=1) <= radius**2

    def sampler(rng, n):
        r = radius * np.sqrt(rng.uniform(0, 1, n))
        th = rng.uniform(0, 2 * np.pi, n)
        return np.mod(center + np.column_stack([r * np.cos(th), r * np.sin(th)]), 1.0)

    return in_set, sampler, np.pi * radius**2
