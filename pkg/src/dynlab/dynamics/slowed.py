"""Cat map slowed down near its fixed point by a Hamiltonian time change."""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from dynlab.dynamics.toral import CAT
from dynlab.flatness import smoothstep

LAMBDA = (3.0 + np.sqrt(5.0)) / 2.0


def _eigenframe():
    vals, vecs = np.linalg.eigh(CAT.astype(float))
    P = vecs[:, ::-1]  # columns: unstable, stable
    return P * np.sign(P[0])


@njit(cache=True)
def _beta_scalar(u, r0):
    v = u / (r0 * r0)
    if v >= 1.0:
        return 1.0, 0.0, 0.0
    if v <= 0.0:
        S, S1, S2 = 0.0, 0.0, 0.0
    else:
        w = 1.0 / v - 1.0 / (1.0 - v)
        if w > 0:
            e = math.exp(-w)
            S = e / (1.0 + e)
        else:
            S = 1.0 / (1.0 + math.exp(w))
        q = 1.0 / v**2 + 1.0 / (1.0 - v) ** 2
        dq = -2.0 / v**3 + 2.0 / (1.0 - v) ** 3
        S1 = S * (1.0 - S) * q
        S2 = S1 * (1.0 - 2.0 * S) * q + S * (1.0 - S) * dq
    b = 1.0 - (1.0 - v) * (1.0 - S)
    b1 = ((1.0 - S) + (1.0 - v) * S1) / r0**2
    b2 = (-2.0 * S1 + (1.0 - v) * S2) / r0**4
    return b, b1, b2


@njit(cache=True)
def _rhs(s1, s2, d, L, r0):
    """Field and variational right-hand side; d = (D00, D01, D10, D11)."""
    b, b1, b2 = _beta_scalar(s1 * s1 + s2 * s2, r0)
    f1 = L * s1 * (b + 2 * s2 * s2 * b1)
    f2 = -L * s2 * (b + 2 * s1 * s1 * b1)
    dg = L * (b + 2 * (s1 * s1 + s2 * s2) * b1 + 4 * s1 * s1 * s2 * s2 * b2)
    j01 = L * s1 * s2 * (6 * b1 + 4 * s2 * s2 * b2)
    j10 = -L * s1 * s2 * (6 * b1 + 4 * s1 * s1 * b2)
    out = np.empty(6)
    out[0], out[1] = f1, f2
    out[2] = dg * d[0] + j01 * d[2]
    out[3] = dg * d[1] + j01 * d[3]
    out[4] = j10 * d[0] - dg * d[2]
    out[5] = j10 * d[1] - dg * d[3]
    return out


@njit(cache=True)
def _flow_kernel(s, r0, substeps, L):
    n = s.shape[0]
    s_out = np.empty((n, 2))
    D_out = np.empty((n, 2, 2))
    h = 1.0 / substeps
    for i in range(n):
        st = np.array([s[i, 0], s[i, 1], 1.0, 0.0, 0.0, 1.0])
        for _ in range(substeps):
            k1 = _rhs(st[0], st[1], st[2:], L, r0)
            t2 = st + 0.5 * h * k1
            k2 = _rhs(t2[0], t2[1], t2[2:], L, r0)
            t3 = st + 0.5 * h * k2
            k3 = _rhs(t3[0], t3[1], t3[2:], L, r0)
            t4 = st + h * k3
            k4 = _rhs(t4[0], t4[1], t4[2:], L, r0)
            st = st + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s_out[i, 0], s_out[i, 1] = st[0], st[1]
        D_out[i, 0, 0], D_out[i, 0, 1] = st[2], st[3]
        D_out[i, 1, 0], D_out[i, 1, 1] = st[4], st[5]
    return s_out, D_out


@dataclass(frozen=True)
class SlowedToralMap:
    """Time-1 map of the Hamiltonian K = log(lambda) s1 s2 beta(s1^2 + s2^2) near 0,
    the linear cat map elsewhere.

    beta(u) = 1 - (1 - v)(1 - S(v)), v = u / r0^2: beta(0) = 0 and beta == 1 beyond r0.
    Because the field is Hamiltonian, the map preserves area; outside radius
    lambda * r0 the flow line never enters the slowed disk and the map is linear.
    """

    r0: float = 0.08
    substeps: int = 100

    def __post_init__(self):
        if not 0.0 < LAMBDA * self.r0 < 0.5:
            raise ValueError("slow-down disk must fit in a fundamental domain")

    @property
    def matrix(self):
        return CAT.astype(float)

    def _beta(self, u):
        v = u / self.r0**2
        S, S1, S2 = smoothstep(v, 2)
        b = 1.0 - (1.0 - v) * (1.0 - S)
        b1 = ((1.0 - S) + (1.0 - v) * S1) / self.r0**2
        b2 = (-2.0 * S1 + (1.0 - v) * S2) / self.r0**4
        big = v >= 1.0
        return np.where(big, 1.0, b), np.where(big, 0.0, b1), np.where(big, 0.0, b2)

    def field(self, s):
        L = np.log(LAMBDA)
        s1, s2 = s[:, 0], s[:, 1]
        b, b1, _ = self._beta(s1**2 + s2**2)
        return np.column_stack([L * s1 * (b + 2 * s2**2 * b1), -L * s2 * (b + 2 * s1**2 * b1)])

    def field_jacobian(self, s):
        L = np.log(LAMBDA)
        s1, s2 = s[:, 0], s[:, 1]
        b, b1, b2 = self._beta(s1**2 + s2**2)
        diag = b + 2 * (s1**2 + s2**2) * b1 + 4 * s1**2 * s2**2 * b2
        J = np.empty((len(s), 2, 2))
        J[:, 0, 0] = L * diag
        J[:, 0, 1] = L * s1 * s2 * (6 * b1 + 4 * s2**2 * b2)
        J[:, 1, 0] = -L * s1 * s2 * (6 * b1 + 4 * s1**2 * b2)
        J[:, 1, 1] = -L * diag
        return J

    def _flow1(self, s):
        return _flow_kernel(np.ascontiguousarray(s, dtype=float), self.r0, self.substeps, np.log(LAMBDA))

    def step(self, y):
        """One step on T^2 for an (N, 2) batch; returns (y', Dy') in ambient coordinates."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        P = _eigenframe()
        lift = y - np.round(y)
        s = lift @ P
        near = np.linalg.norm(s, axis=1) < LAMBDA * self.r0
        out = np.mod(y @ self.matrix.T, 1.0)
        D = np.repeat(self.matrix[None], len(y), axis=0)
        if np.any(near):
            sn, Dn = self._flow1(s[near])
            out[near] = np.mod(sn @ P.T, 1.0)
            D[near] = np.einsum("ij,njk,kl->nil", P, Dn, P.T)
        return out, D


def slowed_step(smap, y):
    return smap.step(y)
