"""Points of N = D^2 x L, suspension gluing, and cylindrical charts."""

from dataclasses import dataclass, field

import numpy as np

CHART_RADIUS = 0.25  # displacements beyond this are outside the chart


@dataclass(frozen=True)
class DiskPoint:
    x1: float
    x2: float

    def __post_init__(self):
        if self.x1**2 + self.x2**2 > 1.0 + 1e-12:
            raise ValueError("disk point outside the unit disk")

    @property
    def array(self):
        return np.array([self.x1, self.x2])


@dataclass(frozen=True)
class TorusPoint:
    y: tuple

    def __post_init__(self):
        y = tuple(float(v) for v in self.y)
        if any(not 0.0 <= v < 1.0 for v in y):
            raise ValueError("torus coordinates must lie in [0, 1)")
        object.__setattr__(self, "y", y)

    @classmethod
    def wrap(cls, y):
        y = np.mod(np.asarray(y, dtype=float), 1.0)
        y[y >= 1.0] = 0.0
        return cls(tuple(y))

    @property
    def array(self):
        return np.array(self.y)


@dataclass(frozen=True)
class SuspensionPoint:
    x: DiskPoint
    y: TorusPoint
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ValueError("tau must be normalized into [0, 1)")

    @property
    def array(self):
        return np.concatenate([self.x.array, self.y.array, [self.tau]])

    @classmethod
    def from_array(cls, z, A=None):
        z = np.asarray(z, dtype=float)
        y, tau = z[2:-1], z[-1]
        if A is not None:
            y, tau = normalize_suspension(y, tau, A)
        return cls(DiskPoint(z[0], z[1]), TorusPoint.wrap(y), float(tau))


def normalize_suspension(y, tau, A):
    """Bring tau into [0, 1) using (y, 1) ~ (A y, 0).

    Returns (y', tau') with y' reduced mod 1. Accepts scalar tau with y of shape (d,)
    or arrays tau (N,) with y (N, d).
    """
    y = np.array(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(tau)):
        raise ValueError("tau must be finite")
    g = np.floor(tau).astype(np.int64)
    tau_out = tau - g
    # floating residue: tau - floor(tau) can round up to 1.0
    bump = tau_out >= 1.0
    tau_out = np.where(bump, 0.0, tau_out)
    g = g + bump
    M, Minv = A.matrix, A.matrix_inv
    if y.ndim == 1:
        P = M if g >= 0 else Minv
        for _ in range(abs(int(g))):
            y = y @ P.T
        return np.mod(y, 1.0), float(tau_out)
    for sign, P in ((1, M), (-1, Minv)):
        todo = sign * g
        while np.any(todo > 0):
            idx = todo > 0
            y[idx] = y[idx] @ P.T
            todo = todo - idx
    return np.mod(y, 1.0), tau_out


@dataclass
class SplittingEstimate:
    """Finite-horizon splitting at a point; columns of each array span the subspace.

    ``En`` holds directions that are neutral in the surrogate (the disk factor);
    they are reported apart from Es/Ec/Eu and flagged.
    """

    Es: np.ndarray
    Ec: np.ndarray
    Eu: np.ndarray
    lam: float
    lam_p: float
    mu_p: float
    mu: float
    En: np.ndarray = None
    flags: list = field(default_factory=list)

    @property
    def dims(self):
        n = 0 if self.En is None else self.En.shape[1]
        return self.Es.shape[1], self.Ec.shape[1], self.Eu.shape[1], n

    def rates_ordered(self, tol=0.0):
        return self.lam < self.lam_p - tol and self.lam_p <= 1 + tol and 1 - tol <= self.mu_p < self.mu + tol


def expected_dims(m):
    """(dim Es, dim Ec, dim Eu) of the pointwise partially hyperbolic splitting."""
    mp = (m - 3) // 2
    return mp + 1, 1, m - mp - 2


@dataclass(frozen=True)
class CylChart:
    """Affine orthonormal chart; coordinates (xi_u, xi_c, zeta) of z - base."""

    base: np.ndarray
    axis_u: np.ndarray
    axis_c: np.ndarray
    zeta_axes: np.ndarray  # rows
    gamma0: float
    A_matrix: np.ndarray = None  # fiber gluing, used to lift across tau = 0

    @property
    def frame(self):
        return np.vstack([self.axis_u, self.axis_c, self.zeta_axes])

    @property
    def dim(self):
        return len(self.base)

    def displacement(self, z):
        """Ambient displacement z - base with the fiber wrapped to [-1/2, 1/2)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        z = z.copy()
        if self.A_matrix is not None:
            dt = z[:, -1] - self.base[-1]
            up, down = dt < -0.5, dt > 0.5
            if np.any(up):  # (y, tau) ~ (A^-1 y, tau + 1)
                Minv = np.rint(np.linalg.inv(self.A_matrix))
                z[up, 2:-1] = z[up, 2:-1] @ Minv.T
                z[up, -1] += 1.0
            if np.any(down):
                z[down, 2:-1] = z[down, 2:-1] @ self.A_matrix.T
                z[down, -1] -= 1.0
        disp = z - self.base
        disp[:, 2:-1] -= np.round(disp[:, 2:-1])
        return disp

    def coords(self, z):
        """Chart coordinates (N, m): columns xi_u, xi_c, zeta..."""
        return self.displacement(z) @ self.frame.T

    def ambient(self, coords):
        z = self.base + np.atleast_2d(coords) @ self.frame
        z[:, 2:-1] = np.mod(z[:, 2:-1], 1.0)
        return z

    def in_delta(self, z, gamma=None):
        g = self.gamma0 if gamma is None else gamma
        c = self.coords(z)
        return (np.hypot(c[:, 0], c[:, 1]) <= g) & (np.linalg.norm(c[:, 2:], axis=1) <= g)


def to_cylindrical(chart, z):
    """(rho, theta, zeta) of ambient points; theta in [0, 2 pi), 0 at rho = 0."""
    disp = chart.displacement(z)
    if np.any(np.linalg.norm(disp, axis=1) > CHART_RADIUS):
        raise ValueError("point outside the chart")
    c = disp @ chart.frame.T
    rho = np.hypot(c[:, 0], c[:, 1])
    theta = np.where(rho > 0, np.mod(np.arctan2(c[:, 1], c[:, 0]), 2 * np.pi), 0.0)
    return rho, theta, c[:, 2:]


def from_cylindrical(chart, rho, theta, zeta):
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    c = np.column_stack([rho * np.cos(theta), rho * np.sin(theta), zeta])
    z = chart.base + c @ chart.frame
    z[:, 2:-1] = np.mod(z[:, 2:-1], 1.0)
    return z


def cyl_chart_at(z0, gamma0, bundles, X, A_matrix=None, u_hint=None):
    """Chart at z0 with axis_c along X(z0) and axis_u in the unstable bundle.

    ``u_hint`` (ambient vector) selects the line inside ``bundles.Eu``; by default
    the first Eu column is used.
    """
    if not 0.0 < gamma0 < 0.1:
        raise ValueError("gamma0 must lie in (0, 0.1)")
    z0 = np.asarray(z0.array if isinstance(z0, SuspensionPoint) else z0, dtype=float)
    Xz = X(z0[None])[0]
    nx = np.linalg.norm(Xz)
    if nx < 1e-14:
        raise ValueError("X vanishes at the base point")
    c = Xz / nx
    Eu = np.atleast_2d(bundles.Eu.T).T
    u = Eu[:, 0] if u_hint is None else Eu @ np.linalg.lstsq(Eu, u_hint, rcond=None)[0]
    u = u - (u @ c) * c
    u /= np.linalg.norm(u)
    m = len(z0)
    Q, _ = np.linalg.qr(np.column_stack([u, c, np.eye(m)]))
    zeta = Q[:, 2:m].T
    # tidy signs so zeta axes point along positive ambient coordinates where possible
    for i in range(len(zeta)):
        if zeta[i][np.argmax(np.abs(zeta[i]))] < 0:
            zeta[i] = -zeta[i]
    return CylChart(z0, u, c, zeta, float(gamma0), None if A_matrix is None else np.asarray(A_matrix, float))
