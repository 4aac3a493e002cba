"""Uniform ``step(z) -> (z', Dz')`` adapters over the maps in the suite."""

from dataclasses import dataclass

import numpy as np

from dynlab.dynamics.integrate import FlowOptions, flow_map, glue


@dataclass(frozen=True)
class TorusMap:
    """Linear automorphism y -> M y mod 1 (any integer unimodular M)."""

    M: np.ndarray

    @property
    def dim(self):
        return self.M.shape[0]

    def step(self, y):
        y = np.atleast_2d(y)
        D = np.broadcast_to(self.M.astype(float), (len(y),) + self.M.shape)
        return np.mod(y @ self.M.T, 1.0), D

    def inverse_step(self, y):
        Minv = np.rint(np.linalg.inv(self.M))
        return TorusMap(Minv).step(y)


@dataclass(frozen=True)
class IdentityMap:
    dim: int

    def step(self, z):
        z = np.atleast_2d(z)
        return z.copy(), np.broadcast_to(np.eye(self.dim), (len(z), self.dim, self.dim))

    inverse_step = step


@dataclass(frozen=True)
class CircleRotation:
    alpha: float
    dim: int = 1

    def step(self, x):
        x = np.atleast_2d(x)
        return np.mod(x + self.alpha, 1.0), np.ones((len(x), 1, 1))


@dataclass(frozen=True)
class FlowMap:
    """phi^t of the suspension field via the RK4 integrator."""

    X: object
    A: object
    t: float = 1.0
    h: float = 1e-3

    @property
    def dim(self):
        return self.X.dim

    def step(self, z):
        return flow_map(self.X, self.t, z, self.A, FlowOptions(h=self.h))

    def inverse_step(self, z):
        return flow_map(self.X, -self.t, z, self.A, FlowOptions(h=self.h))


@dataclass(frozen=True)
class TubeMap:
    """Exact phi^t where X == d/dtau; the Jacobian is blockdiag(I_2, A^g, 1)."""

    A: object
    t: float = 1.0

    @property
    def dim(self):
        return self.A.d + 3

    def _go(self, z, t):
        z = np.array(np.atleast_2d(z), dtype=float)
        m = z.shape[1]
        J = np.repeat(np.eye(m)[None], len(z), axis=0)
        z[:, -1] += t
        z, J = glue(z, J, self.A)
        return z, J

    def step(self, z):
        return self._go(z, self.t)

    def inverse_step(self, z):
        return self._go(z, -self.t)


@dataclass(frozen=True)
class ComposedWithPhi:
    """z -> phi_sigma(base(z)) with chain-rule Jacobian."""

    base: object
    spec: object

    @property
    def dim(self):
        return self.base.dim

    def step(self, z):
        from dynlab.perturbation import phi_sigma

        zt, Jt = self.base.step(z)
        out, Jp = phi_sigma(self.spec, zt, with_jacobian=True)
        return out, np.einsum("nij,njk->nik", Jp, Jt)
