"""Birkhoff averages and component detection by single-linkage clustering with a gap test."""

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage


def _image(step, z):
    res = step(z)
    return res[0] if isinstance(res, tuple) else res


def birkhoff_averages(step, observables, z0, n):
    """Time averages (1/n) sum_{i<n} obs(f^i z) for a batch of seeds; shape (N, n_obs)."""
    z = np.array(np.atleast_2d(z0), dtype=float)
    acc = np.zeros((len(z), len(observables)))
    for _ in range(n):
        acc += np.column_stack([np.asarray(o(z), dtype=float) for o in observables])
        z = _image(step, z)
    return acc / n


def birkhoff_average(step, observable, z0, n):
    """Time average of one observable from one seed."""
    if n < 1:
        raise ValueError("n must be positive")
    return float(birkhoff_averages(step, [observable], z0, n)[0, 0])


def default_observables(dim, seed, periodic=False, n_modes=3):
    """Coordinate functions plus one random smooth observable."""
    rng = np.random.default_rng(seed)
    k = rng.integers(-2, 3, (n_modes, dim)).astype(float)
    k[np.all(k == 0, axis=1), 0] = 1.0
    phase = rng.uniform(0, 2 * np.pi, n_modes)
    amp = rng.normal(size=n_modes)
    freq = 2 * np.pi if periodic else np.pi / 2

    def smooth(z):
        return np.sin(freq * np.atleast_2d(z) @ k.T + phase) @ amp

    coords = [(lambda z, i=i: np.atleast_2d(z)[:, i]) for i in range(dim)]
    return coords + [smooth]


@dataclass
class ComponentPartition:
    n_components: int  # -1 when unresolved
    labels: np.ndarray  # per seed; -1 marks outliers
    averages: np.ndarray
    gap_ratio: float
    p_value: float
    margins: list  # single-linkage distance between each cluster and the rest
    centroids: list
    status: str  # "resolved" or "component count unresolved"
    flags: list = field(default_factory=list)

    @property
    def resolved(self):
        return self.status == "resolved"

    def to_dict(self):
        return {
            "n_components": self.n_components,
            "labels": self.labels.tolist(),
            "gap_ratio": self.gap_ratio,
            "p_value": self.p_value,
            "margins": self.margins,
            "centroids": self.centroids,
            "status": self.status,
            "flags": self.flags,
        }


def _gap_statistic(x, max_k):
    """Largest ratio of consecutive single-linkage merge heights among cuts into 2..max_k clusters."""
    if len(x) < 3:
        return 1.0, 1
    h = linkage(x, method="single")[:, 2]
    n = len(x)
    best, best_k = 1.0, 1
    for k in range(2, min(max_k, n - 1) + 1):
        lo, hi = h[n - 1 - k], h[n - k]
        ratio = hi / lo if lo > 0 else (np.inf if hi > 0 else 1.0)
        if ratio > best:
            best, best_k = ratio, k
    return best, best_k


def cluster_averages(avg, scale, alpha=0.01, n_null=499, seed=0, max_k=20, min_frac=0.02, spread_tol=0.05):
    """Partition of per-seed averages.

    ``scale`` is the per-observable spread over the phase space; averages are divided by
    it so coordinates that only carry sampling noise do not swamp real separation.
    The gap ratio is compared with uniform samples over the bounding box of the data.
    """
    avg = np.atleast_2d(avg)
    n = len(avg)
    scale = np.where(np.asarray(scale) > 0, scale, 1.0)
    x = avg / scale
    spread = float(np.max(np.ptp(x, axis=0))) if n else 0.0
    labels = np.zeros(n, dtype=int)
    if spread == 0.0:
        return ComponentPartition(1, labels, avg, 1.0, 1.0, [np.inf], [avg.mean(axis=0).tolist()], "resolved")
    stat, k = _gap_statistic(x, max_k)
    rng = np.random.default_rng(seed)
    lo, hi = x.min(axis=0), x.max(axis=0)
    null = np.array([_gap_statistic(rng.uniform(lo, hi, x.shape), max_k)[0] for _ in range(n_null)])
    p = float((1 + np.sum(null >= stat)) / (n_null + 1))
    flags = []
    if p >= alpha:
        if spread <= spread_tol:
            return ComponentPartition(
                1, labels, avg, float(stat), p, [np.inf], [avg.mean(axis=0).tolist()], "resolved",
                ["no significant gap; averages agree within tolerance"],
            )
        return ComponentPartition(-1, labels - 1, avg, float(stat), p, [], [], "component count unresolved")
    labels = fcluster(linkage(x, method="single"), k, criterion="maxclust") - 1
    sizes = np.bincount(labels)
    small = sizes < max(1, int(np.ceil(min_frac * n)))
    if np.any(small):
        flags.append(f"{int(sizes[small].sum())} seeds in clusters below {min_frac:.0%} marked as outliers")
        labels = np.where(small[labels], -1, labels)
    kept = [c for c in range(len(sizes)) if not small[c]]
    # order clusters by centroid so labels are reproducible
    kept.sort(key=lambda c: tuple(avg[labels == c].mean(axis=0)))
    remap = {c: i for i, c in enumerate(kept)}
    labels = np.array([remap.get(c, -1) for c in labels])
    centroids, margins = [], []
    for i in range(len(kept)):
        inside = x[labels == i]
        outside = x[(labels != i) & (labels >= 0)]
        centroids.append(avg[labels == i].mean(axis=0).tolist())
        if len(outside):
            d = np.sqrt(((inside[:, None, :] - outside[None, :, :]) ** 2).sum(axis=2))
            margins.append(float(d.min()))
        else:
            margins.append(float("inf"))
    return ComponentPartition(len(kept), labels, avg, float(stat), p, margins, centroids, "resolved", flags)


def detect_components(step, observables, n_seeds, n_steps, sampler, seed=0, alpha=0.01, n_null=499, **kw):
    """Seeds uniform from ``sampler(rng, n)``; clusters their Birkhoff averages.

    Observable scales come from their range over an extra uniform sample of the space.
    """
    rng = np.random.default_rng(seed)
    z0 = sampler(rng, n_seeds)
    ref = sampler(rng, 4096)
    scale = np.array([np.ptp(np.asarray(o(ref), dtype=float)) for o in observables])
    avg = birkhoff_averages(step, observables, z0, n_steps)
    part = cluster_averages(avg, scale, alpha=alpha, n_null=n_null, seed=seed, **kw)
    return part, z0
