"""Divergence-free disk flow from a flat stream function, and the suspension field X."""

from dataclasses import dataclass

import numpy as np

from dynlab.flatness import AlphaProfile, collar, log_collar, smoothstep


@dataclass(frozen=True)
class DiskFlowField:
    """V = (dH/dx2, -dH/dx1) with H = c_H * kappa(|x|^2) * b(|x|^2) * q(x).

    kappa is flat at the rim, b switches the field off on |x| <= r_rest, and
    q(x) = x1^2 - x2^2 + x1 x2.
    """

    c_H: float = 0.25  # keeps the RK4 volume defect below 10 h^4 per unit time
    r_rest: float = 0.3
    r_on: float = 0.45

    def _F(self, s, nderiv):
        k = collar(s, nderiv)
        lo, hi = self.r_rest**2, self.r_on**2
        b = smoothstep((s - lo) / (hi - lo), nderiv)
        if nderiv == 0:
            return k * b
        k, k1 = k[0], k[1]
        b0 = b[0]
        b1 = b[1] / (hi - lo)
        F1 = k1 * b0 + k * b1
        if nderiv == 1:
            return k * b0, F1
        b2 = b[2] / (hi - lo) ** 2
        F2 = collar(s, 2)[2] * b0 + 2 * k1 * b1 + k * b2
        return k * b0, F1, F2

    @staticmethod
    def _q(x):
        x1, x2 = x[:, 0], x[:, 1]
        q = x1**2 - x2**2 + x1 * x2
        gq = np.column_stack([2 * x1 + x2, -2 * x2 + x1])
        hq = np.array([[2.0, 1.0], [1.0, -2.0]])
        return q, gq, hq

    def H(self, x):
        x = np.atleast_2d(x)
        s = np.sum(x**2, axis=1)
        return self.c_H * self._F(s, 0) * self._q(x)[0]

    def grad_H(self, x):
        x = np.atleast_2d(x)
        s = np.sum(x**2, axis=1)
        F, F1 = self._F(s, 1)
        q, gq, _ = self._q(x)
        return self.c_H * (2 * (F1 * q)[:, None] * x + F[:, None] * gq)

    def hess_H(self, x):
        x = np.atleast_2d(x)
        s = np.sum(x**2, axis=1)
        F, F1, F2 = self._F(s, 2)
        q, gq, hq = self._q(x)
        xx = np.einsum("ni,nj->nij", x, x)
        xg = np.einsum("ni,nj->nij", x, gq)
        eye = np.eye(2)[None]
        out = (
            4 * (F2 * q)[:, None, None] * xx
            + 2 * (F1 * q)[:, None, None] * eye
            + 2 * F1[:, None, None] * (xg + xg.transpose(0, 2, 1))
            + F[:, None, None] * hq[None]
        )
        return self.c_H * out

    def V(self, x):
        g = self.grad_H(x)
        return np.column_stack([g[:, 1], -g[:, 0]])

    def DV(self, x):
        h = self.hess_H(x)
        return np.stack([h[:, 1, :], -h[:, 0, :]], axis=1)

    def div(self, x):
        j = self.DV(x)
        return j[:, 0, 0] + j[:, 1, 1]

    def log_speed(self, x):
        """log |V(x)| evaluated without underflow near the rim."""
        x = np.atleast_2d(x)
        s = np.sum(x**2, axis=1)
        lo, hi = self.r_rest**2, self.r_on**2
        b = smoothstep((s - lo) / (hi - lo))
        k, k1 = collar(s, 1)
        q, gq, _ = self._q(x)
        # grad H / kappa = 2 (kappa'/kappa) q x b + grad(b) stuff; beyond r_on, b == 1
        ratio = -2.0 / np.where(s < 1, 1 - s, 1.0) ** 3  # kappa'/kappa
        with np.errstate(divide="ignore"):
            g = 2 * (ratio * q * b)[:, None] * x + b[:, None] * gq
            out = np.log(self.c_H) + log_collar(s) + np.log(np.linalg.norm(g, axis=1))
        # inside the switching annulus use the direct value
        direct = s < hi
        if np.any(direct):
            with np.errstate(divide="ignore"):
                out[direct] = np.log(np.linalg.norm(self.V(x[direct]), axis=1))
        return out


@dataclass(frozen=True)
class SuspensionField:
    """X(x, y, tau) = (V(x), 0, alpha(x)) on D^2 x L.

    State layout: columns [x1, x2, y_1..y_d, tau].
    """

    V: DiskFlowField
    alpha: AlphaProfile
    d: int

    @property
    def dim(self):
        return self.d + 3

    def __call__(self, z):
        z = np.atleast_2d(z)
        x = z[:, :2]
        out = np.zeros_like(z)
        out[:, :2] = self.V.V(x)
        out[:, -1] = self.alpha(x)
        return out

    def jacobian(self, z):
        z = np.atleast_2d(z)
        x = z[:, :2]
        J = np.zeros((len(z), self.dim, self.dim))
        J[:, :2, :2] = self.V.DV(x)
        J[:, -1, :2] = self.alpha.grad(x)
        return J

    def divergence(self, z):
        return np.trace(self.jacobian(z), axis1=1, axis2=2)

    def rest_radius(self):
        """Radius of the tube |x| <= r on which X == d/dtau exactly."""
        return min(self.V.r_rest, self.alpha.u_inner)


def field_X(V, alpha, d):
    """Assemble X; the tube where V vanishes must sit where alpha == 1."""
    if alpha.u_inner <= V.r_rest:
        raise ValueError("alpha must equal 1 on the rest disk of V (u_inner > r_rest)")
    return SuspensionField(V, alpha, d)


def rim_decay(V, alpha, shells=range(2, 14), n_rays=64):
    """Finite proxy for |V| / alpha -> 0 at the rim.

    Max over rays of log(|V| / alpha) on the circles r = 1 - 2^-j; the proxy holds when
    these maxima decrease strictly. ``residual`` is the log ratio on the finest circle.
    """
    th = np.linspace(0.0, 2 * np.pi, n_rays, endpoint=False)
    radii, worst = [], []
    for j in shells:
        r = 1.0 - 2.0 ** (-j)
        x = r * np.column_stack([np.cos(th), np.sin(th)])
        radii.append(r)
        worst.append(float(np.max(V.log_speed(x) - alpha.log(x))))
    monotone = bool(np.all(np.diff(worst) < 0))
    return {"radii": radii, "max_log_ratio": worst, "monotone": monotone, "residual": worst[-1]}
