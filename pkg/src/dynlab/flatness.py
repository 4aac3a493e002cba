"""Admissible sequences, numerical rho-flatness checks and C-infinity bump profiles."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from dynlab._fd import MAX_ORDER, multi_indices, partial_richardson

CUBE = "cube"
DISK = "disk"


# ---------------------------------------------------------------------------
# smooth profiles


def smoothstep(u, nderiv=0):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, flat to all orders at both ends.

    Returns S(u) when ``nderiv == 0``, otherwise a tuple (S, S', ..., S^(nderiv))
    with ``nderiv <= 2``.
    """
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    uc = np.where(inside, u, 0.5)
    w = 1.0 / uc - 1.0 / (1.0 - uc)
    s = np.where(inside, expit(-w), (u >= 1.0).astype(float))
    if nderiv == 0:
        return s
    q = 1.0 / uc**2 + 1.0 / (1.0 - uc) ** 2
    s1 = np.where(inside, s * (1.0 - s) * q, 0.0)
    if nderiv == 1:
        return s, s1
    dq = -2.0 / uc**3 + 2.0 / (1.0 - uc) ** 3
    s2 = np.where(inside, s1 * (1.0 - 2.0 * s) * q + s * (1.0 - s) * dq, 0.0)
    return s, s1, s2


def log_smoothstep(u):
    """log S(u) without underflow (-inf for u <= 0)."""
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    uc = np.where(inside, u, 0.5)
    w = 1.0 / uc - 1.0 / (1.0 - uc)
    out = -np.logaddexp(0.0, w)
    out = np.where(u >= 1.0, 0.0, out)
    return np.where(u <= 0.0, -np.inf, out)


def collar(s, nderiv=0):
    """kappa(s) = exp(1 - 1/(1-s)^2) for s < 1, else 0; kappa(0) = 1, flat at s = 1."""
    s = np.asarray(s, dtype=float)
    inside = s < 1.0
    e = np.where(inside, 1.0 - s, 1.0)
    k = np.where(inside, np.exp(1.0 - 1.0 / e**2), 0.0)
    if nderiv == 0:
        return k
    g1 = -2.0 / e**3
    k1 = np.where(inside, k * g1, 0.0)
    if nderiv == 1:
        return k, k1
    g2 = -6.0 / e**4
    k2 = np.where(inside, k * (g2 + g1**2), 0.0)
    return k, k1, k2


def log_collar(s):
    s = np.asarray(s, dtype=float)
    e = np.where(s < 1.0, 1.0 - s, 1.0)
    return np.where(s < 1.0, 1.0 - 1.0 / e**2, -np.inf)


# ---------------------------------------------------------------------------
# admissible sequences


def dist_to_boundary(x, domain):
    """Distance to the boundary in the norm that defines the shells (sup-norm on the cube)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if domain == CUBE:
        d = 1.0 - np.max(np.abs(x), axis=1)
    elif domain == DISK:
        d = 1.0 - np.linalg.norm(x, axis=1)
    else:
        raise ValueError(f"unknown domain {domain!r}")
    return np.clip(d, 0.0, None)


@dataclass(frozen=True)
class AdmissibleSequence:
    """A sequence rho_n(x), n >= 0, positive inside and zero on the boundary."""

    func: Callable  # (n, points) -> values
    domain: str = CUBE
    dim: int = 2
    label: str = "custom"

    def __call__(self, n, x):
        return np.asarray(self.func(int(n), np.atleast_2d(x)), dtype=float)

    def scale_by(self, k):
        """rho_n -> rho_n * 2^(-k n)."""
        base = self.func

        def scaled(n, x):
            return base(n, x) * 2.0 ** (-k * n)

        return AdmissibleSequence(scaled, self.domain, self.dim, f"{self.label}*2^(-{k}n)")

    def check_boundary(self, n_max=4, n_samples=256, seed=0):
        """Max |rho_n| over a boundary sample; should be 0."""
        pts = boundary_samples(self.domain, self.dim, n_samples, seed)
        return max(float(np.max(np.abs(self(n, pts)))) for n in range(n_max + 1))


def make_admissible_geometric(c, p=1, domain=CUBE, dim=2):
    """rho_n(x) = c * 2^(-n p) * dist(x, boundary)."""
    if c <= 0:
        raise ValueError("c must be positive")
    if int(p) != p or p < 1:
        raise ValueError("p must be an integer >= 1")

    def func(n, x):
        return c * 2.0 ** (-n * p) * dist_to_boundary(x, domain)

    return AdmissibleSequence(func, domain, dim, f"geometric(c={c},p={p})")


# Large enough for the default stream field, alpha and the default slicing blocks up to
# order 3 (measured ratios at c = 1 reach ~1e17). The discriminating part of the check is
# the boundary sample, where every rho_n vanishes regardless of c.
DEFAULT_C = 1e18


def default_admissible(domain=CUBE, dim=2, c=DEFAULT_C):
    """The default family: geometric with p = 1 in the sup-norm (cube) or Euclidean (disk) distance."""
    return make_admissible_geometric(c, 1, domain, dim)


def boundary_samples(domain, dim, n, seed=0):
    rng = np.random.default_rng(seed)
    if domain == DISK:
        th = rng.uniform(0.0, 2.0 * np.pi, n)
        return np.column_stack([np.cos(th), np.sin(th)])
    x = rng.uniform(-1.0, 1.0, (n, dim))
    axis = rng.integers(0, dim, n)
    x[np.arange(n), axis] = rng.choice([-1.0, 1.0], n)
    return x


# ---------------------------------------------------------------------------
# flatness check


@dataclass(frozen=True)
class ShellGrid:
    """Sampling spec: ``n_points`` random points per shell plus exact boundary points."""

    n_points: int = 400
    n_boundary: int = 32
    seed: int = 0

    def sample(self, domain, dim, n):
        if self.n_points < 1:
            raise ValueError("grid too coarse: no shell points")
        rng = np.random.default_rng([self.seed, n])
        lo = 1.0 - 2.0 ** (-n)
        if domain == DISK:
            r = rng.uniform(lo, 1.0, self.n_points)
            th = rng.uniform(0.0, 2.0 * np.pi, self.n_points)
            pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
        else:
            pts = rng.uniform(-1.0, 1.0, (self.n_points, dim))
            axis = rng.integers(0, dim, self.n_points)
            rad = rng.uniform(lo, 1.0, self.n_points) * rng.choice([-1.0, 1.0], self.n_points)
            pts[np.arange(self.n_points), axis] = rad
            pts = np.clip(pts, -1.0, 1.0)
        bnd = boundary_samples(domain, dim, self.n_boundary, seed=self.seed + 1000 + n)
        return np.vstack([pts, bnd])


@dataclass
class FlatnessReport:
    n_max: int
    worst_ratio: list  # per order: max |d^n phi| / rho_n over interior shell points
    worst_excess: list  # per order: max |d^n phi| - (1 + tol) rho_n
    worst_boundary: list  # per order: max |d^n phi| on the boundary sample
    tol_fd: float
    atol: float
    passed: bool
    failing_order: int = -1
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "n_max": self.n_max,
            "worst_ratio": self.worst_ratio,
            "worst_excess": self.worst_excess,
            "worst_boundary": self.worst_boundary,
            "tol_fd": self.tol_fd,
            "atol": self.atol,
            "pass": self.passed,
            "failing_order": self.failing_order,
        }


def is_rho_flat(phi, rho, n_max=3, grid=None, tol_fd=1e-4, atol=1e-9, h0=1e-3):
    """Check |d^alpha phi| <= rho_n on the shell dist_inf >= 1 - 2^-n for |alpha| = n <= n_max.

    ``phi`` maps (N, dim) points to (N,) or (N, k) values; vector-valued fields are
    checked componentwise. Derivatives are Richardson-extrapolated central differences
    with step 2^-n * h0; ``atol`` absorbs round-off where rho_n vanishes.
    """
    if n_max > MAX_ORDER:
        raise ValueError(f"n_max must be <= {MAX_ORDER}")
    grid = grid or ShellGrid()
    dim = rho.dim
    ratios, excesses, bnds = [], [], []
    passed, failing = True, -1
    for n in range(n_max + 1):
        pts = grid.sample(rho.domain, dim, n)
        r = rho(n, pts)
        h = 2.0 ** (-n) * h0
        worst_r, worst_e, worst_b = 0.0, -np.inf, 0.0
        for alpha in multi_indices(dim, n):
            d = np.asarray(partial_richardson(phi, pts, alpha, h) if n else phi(pts))
            mag = np.abs(d).reshape(len(pts), -1).max(axis=1)
            pos = r > 0
            if np.any(pos):
                worst_r = max(worst_r, float(np.max(mag[pos] / r[pos])))
            worst_e = max(worst_e, float(np.max(mag - (1.0 + tol_fd) * r)))
            if np.any(~pos):
                worst_b = max(worst_b, float(np.max(mag[~pos])))
        ratios.append(worst_r)
        excesses.append(worst_e)
        bnds.append(worst_b)
        if worst_e > atol and passed:
            passed, failing = False, n
    return FlatnessReport(n_max, ratios, excesses, bnds, tol_fd, atol, passed, failing)


# ---------------------------------------------------------------------------
# bump library


@dataclass(frozen=True)
class BumpSpec:
    """Parameters of the explicit bumps.

    ``r_rest``/``r_on``: the disk field vanishes for |x| <= r_rest and carries its
    full profile beyond r_on. ``u_inner``: alpha == 1 for |x| <= u_inner.
    """

    u_inner: float = 0.7
    r_rest: float = 0.3
    r_on: float = 0.45
    c_H: float = 0.25
    gamma: float = 0.05

    def validate(self):
        if not 0.0 < self.r_rest < self.r_on < 1.0:
            raise ValueError("need 0 < r_rest < r_on < 1")
        if not 0.0 < self.u_inner < 1.0:
            raise ValueError("u_inner must lie in (0, 1)")
        if not 0.0 < self.gamma < 0.1:
            raise ValueError("gamma must lie in (0, 0.1)")


@dataclass(frozen=True)
class AlphaProfile:
    """alpha(x) = S((1 - |x|) / (1 - u_inner)); alpha == 1 on |x| <= u_inner."""

    u_inner: float

    def _u(self, x):
        x = np.atleast_2d(x)
        return (1.0 - np.linalg.norm(x, axis=1)) / (1.0 - self.u_inner)

    def __call__(self, x):
        return smoothstep(self._u(x))

    def log(self, x):
        return log_smoothstep(self._u(x))

    def grad(self, x):
        x = np.atleast_2d(x)
        r = np.linalg.norm(x, axis=1)
        _, s1 = smoothstep(self._u(x), 1)
        rs = np.where(r > 0, r, 1.0)
        return (-s1 / (1.0 - self.u_inner) / rs)[:, None] * x


def bump_alpha(rho_bar=None, U_inner_radius=0.7):
    """Time-change profile: 1 near the centre, positive inside, flat at the rim.

    ``rho_bar`` is accepted for interface symmetry; flatness against it is a
    separate check via :func:`is_rho_flat`.
    """
    if not 0.0 < U_inner_radius < 1.0:
        raise ValueError("U_inner_radius must lie in (0, 1)")
    return AlphaProfile(float(U_inner_radius))


# psi peaks at |w| = 0.55 gamma where the exponent equals -1/0.2025
_PSI_NORM = np.exp(1.0 / 0.2025)


@dataclass(frozen=True)
class PsiProfile:
    """psi(w) = K exp(-gamma^2 / ((|w| - 0.1 gamma)(gamma - |w|))) on 0.1 gamma < |w| < gamma."""

    gamma: float

    def _parts(self, w):
        w = np.abs(np.asarray(w, dtype=float))
        a, b = 0.1 * self.gamma, self.gamma
        inside = (w > a) & (w < b)
        wc = np.where(inside, w, 0.5 * (a + b))
        p = (wc - a) * (b - wc)
        return w, a, b, inside, wc, p

    def __call__(self, w):
        _, _, _, inside, _, p = self._parts(w)
        return np.where(inside, _PSI_NORM * np.exp(-self.gamma**2 / p), 0.0)

    def deriv(self, w):
        """d psi / d|w| (the profile is used on nonnegative arguments)."""
        _, a, b, inside, wc, p = self._parts(w)
        val = _PSI_NORM * np.exp(-self.gamma**2 / p)
        return np.where(inside, val * self.gamma**2 * (a + b - 2.0 * wc) / p**2, 0.0)


@dataclass(frozen=True)
class Psi1Profile:
    """psi1(w) = 1 on |w| <= 0.5 gamma, decreasing to 0 at |w| = gamma."""

    gamma: float

    def _u(self, w):
        return (np.abs(np.asarray(w, dtype=float)) - 0.5 * self.gamma) / (0.5 * self.gamma)

    def __call__(self, w):
        return 1.0 - smoothstep(self._u(w))

    def deriv(self, w):
        _, s1 = smoothstep(self._u(w), 1)
        return -s1 / (0.5 * self.gamma)


def _check_gamma(gamma):
    if not 0.0 < gamma < 0.1:
        raise ValueError("gamma must lie in (0, 0.1)")


def bump_psi(gamma):
    _check_gamma(gamma)
    return PsiProfile(float(gamma))


def bump_psi1(gamma):
    _check_gamma(gamma)
    return Psi1Profile(float(gamma))
