"""Cylinder selection, the rotation perturbation phi_sigma and h = phi_sigma o phi^t."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from dynlab.dynamics.integrate import FlowOptions, flow_map, tube_flow
from dynlab.dynamics.toral import expansion_rate_eta
from dynlab.flatness import bump_psi, bump_psi1
from dynlab.geometry import CylChart, SplittingEstimate, cyl_chart_at


def compute_Nt(eta, t):
    """Smallest positive N with eta^(t N) > 100."""
    if eta <= 1.0 or not 0.0 < t <= 1.0:
        raise ValueError("need eta > 1 and t in (0, 1]")
    n = max(1, math.ceil(math.log(100.0) / (t * math.log(eta))))
    while eta ** (t * n) <= 100.0:
        n += 1
    while n > 1 and eta ** (t * (n - 1)) > 100.0:
        n -= 1
    return n


# ---------------------------------------------------------------------------
# chart at a tube point


def tube_splitting(A, X):
    """Exact splitting at points where X == d/dtau: the fiber eigenlines of A, the
    flow direction, and the (neutral) disk directions."""
    m = A.d + 3
    M = A.matrix.astype(float)
    vals, vecs = np.linalg.eig(M)
    vals, vecs = np.real(vals), np.real(vecs)
    Es, Eu = [], []
    for lam, v in zip(vals, vecs.T):
        e = np.zeros(m)
        e[2:-1] = v / np.linalg.norm(v)
        (Eu if abs(lam) > 1 else Es).append(e)
    lift = np.zeros(m)
    lift[2:-1] = A.unstable_direction()
    # chosen line first
    Eu.sort(key=lambda e: -abs(e @ lift))
    Ec = np.zeros((m, 1))
    Ec[-1, 0] = 1.0
    En = np.zeros((m, 2))
    En[0, 0] = En[1, 1] = 1.0
    s_rates = [abs(v) for v in vals if abs(v) < 1]
    u_rates = [abs(v) for v in vals if abs(v) > 1]
    return SplittingEstimate(
        np.array(Es).T, Ec, np.array(Eu).T, max(s_rates), 1.0, 1.0, min(u_rates), En, ["disk directions neutral"]
    )


def chart_for(X, A, y0, gamma, x0=(0.0, 0.0), tau0=0.5):
    z0 = np.concatenate([np.asarray(x0, float), np.mod(np.asarray(y0, float), 1.0), [tau0]])
    split = tube_splitting(A, X)
    return cyl_chart_at(z0, gamma, split, X, A_matrix=A.matrix, u_hint=split.Eu[:, 0])


# ---------------------------------------------------------------------------
# disjointness certificate


def _box_generators(chart):
    """Columns generate the box |chart coord_i| <= gamma containing Delta."""
    return chart.gamma0 * chart.frame.T


def _image_affine(chart, A, t, j):
    """Affine tube image of the box: (new base, generator matrix, tau window ok)."""
    base = chart.base[None]
    new_base = tube_flow(base, t * j, A)[0]
    g = math.floor(chart.base[-1] + t * j)
    G = _box_generators(chart).copy()
    P = np.linalg.matrix_power(A.matrix.astype(float), g) if g >= 0 else np.linalg.matrix_power(
        A.matrix_inv.astype(float), -g
    )
    G[2:-1, :] = P @ G[2:-1, :]
    return new_base, G


def _sat_margin(c, G1, G2, dirs):
    """Largest separation |n.c| - h1(n) - h2(n) over candidate unit directions."""
    proj = np.abs(dirs @ c) - np.abs(dirs @ G1).sum(axis=1) - np.abs(dirs @ G2).sum(axis=1)
    return float(np.max(proj))


MAX_TRANSLATES = 100_000


def certified_margin(chart, A, t, j):
    """Lower bound on the gap between Delta and its time-(t j) image (>0 certifies disjointness)."""
    gam = chart.gamma0
    tau0 = chart.base[-1]
    new_base, G2 = _image_affine(chart, A, t, j)
    # tau windows must not straddle a gluing
    lo, hi = tau0 + t * j - gam, tau0 + t * j + gam
    if math.floor(lo) != math.floor(hi) or math.floor(tau0 - gam) != math.floor(tau0 + gam):
        return -np.inf
    dtau = abs(new_base[-1] - tau0)
    if dtau > 2 * gam:
        return dtau - 2 * gam
    G1 = _box_generators(chart)
    m = len(chart.base)
    dirs = [np.eye(m)]
    for G in (G1, G2):
        try:
            dirs.append(np.linalg.inv(G))  # rows: face normals
        except np.linalg.LinAlgError:
            pass
    dirs = np.vstack(dirs)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    c0 = new_base - chart.base
    ext = np.abs(G1[2:-1]).sum(axis=1) + np.abs(G2[2:-1]).sum(axis=1)
    lo = np.floor(c0[2:-1] - ext) - 1
    hi = np.ceil(c0[2:-1] + ext) + 2
    if not np.all(np.isfinite(hi - lo)) or np.sum(np.log(hi - lo)) > math.log(MAX_TRANSLATES):
        return -np.inf  # image wraps the torus too often to certify
    ranges = [np.arange(a, b) for a, b in zip(lo, hi)]
    worst = np.inf
    for k in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(A.d, -1).T:
        c = c0.copy()
        c[2:-1] -= k
        worst = min(worst, _sat_margin(c, G1, G2, dirs))
        if worst <= 0:
            return worst
    return worst


def delta_mesh(chart, density=1, seed=0):
    """Sample of Delta with size linear in ``density``: a third uniform inside, a third
    on the side rho = gamma, a third on the side |zeta| = gamma, plus the centre."""
    g = chart.gamma0
    nz = len(chart.base) - 2
    n = 600 * density
    rng = np.random.default_rng([seed, density])
    inner = _uniform_delta_coords(rng, n, g, nz)
    side_r = _uniform_delta_coords(rng, n, g, nz)
    side_r[:, :2] *= g / np.maximum(np.hypot(side_r[:, 0], side_r[:, 1]), 1e-300)[:, None]
    side_z = _uniform_delta_coords(rng, n, g, nz)
    side_z[:, 2:] *= g / np.maximum(np.linalg.norm(side_z[:, 2:], axis=1), 1e-300)[:, None]
    return np.vstack([np.zeros((1, nz + 2)), inner, side_r, side_z])


def _uniform_delta_coords(rng, n, g, nz):
    r = g * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * np.pi, n)
    d = rng.normal(size=(n, nz))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    rz = g * rng.uniform(0, 1, n) ** (1.0 / nz)
    return np.column_stack([r * np.cos(th), r * np.sin(th), rz[:, None] * d])


def sampled_margin(chart, A, t, j, mesh_coords):
    """min over mesh images of max(rho' - gamma, |zeta'| - gamma)."""
    pts = chart.ambient(mesh_coords)
    img = tube_flow(pts, t * j, A)
    c = chart.coords(img)
    out = np.maximum(np.hypot(c[:, 0], c[:, 1]), np.linalg.norm(c[:, 2:], axis=1)) - chart.gamma0
    return float(np.min(out))


@dataclass
class DeltaSearchResult:
    chart: CylChart
    t: float
    N_t: int
    verified_js: list
    certified_margins: dict
    sampled_margins: dict
    margin_min: float
    collar_margin: float
    attempts: int
    avoidance_sets: list = field(default_factory=lambda: ["boundary collar U x L (tube radius)"])

    def to_dict(self):
        ch = self.chart
        return {
            "base": ch.base.tolist(),
            "axis_u": ch.axis_u.tolist(),
            "axis_c": ch.axis_c.tolist(),
            "zeta_axes": ch.zeta_axes.tolist(),
            "gamma0": ch.gamma0,
            "A_matrix": None if ch.A_matrix is None else ch.A_matrix.tolist(),
            "t": self.t,
            "N_t": self.N_t,
            "verified_js": list(self.verified_js),
            "certified_margins": {str(k): v for k, v in self.certified_margins.items()},
            "sampled_margins": {str(k): v for k, v in self.sampled_margins.items()},
            "margin_min": self.margin_min,
            "collar_margin": self.collar_margin,
            "attempts": self.attempts,
            "avoidance_sets": self.avoidance_sets,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        chart = CylChart(
            np.array(d["base"]),
            np.array(d["axis_u"]),
            np.array(d["axis_c"]),
            np.array(d["zeta_axes"]),
            d["gamma0"],
            None if d["A_matrix"] is None else np.array(d["A_matrix"]),
        )
        return cls(
            chart,
            d["t"],
            d["N_t"],
            d["verified_js"],
            {int(k): v for k, v in d["certified_margins"].items()},
            {int(k): v for k, v in d["sampled_margins"].items()},
            d["margin_min"],
            d["collar_margin"],
            d["attempts"],
            d["avoidance_sets"],
        )


class DeltaSearchFailure(RuntimeError):
    def __init__(self, report):
        super().__init__(f"no admissible cylinder found after {report['attempts']} candidates")
        self.report = report


def verify_chart(chart, X, A, t, N_t, density=1, seed=0):
    """Margins for all 0 < |j| <= N_t; returns (certified, sampled, collar margin)."""
    mesh = delta_mesh(chart, density, seed)
    cert, samp = {}, {}
    for j in [j for j in range(-N_t, N_t + 1) if j != 0]:
        cert[j] = certified_margin(chart, A, t, j)
        samp[j] = sampled_margin(chart, A, t, j, mesh) if cert[j] > 0 else -np.inf
    collar = X.rest_radius() - np.linalg.norm(chart.base[:2]) - chart.gamma0 * math.sqrt(2)
    return cert, samp, collar


def find_delta_t(X, A, t, N_t=None, candidates=64, gamma_range=(0.01, 0.05), seed=0, shrink=0.85, density=1):
    """Search seeded fiber base points and shrinking radii for a certified cylinder.

    ``candidates`` is either a count of random fiber points or an explicit (k, d)
    array of them; the first success in deterministic order is returned.
    """
    gmin, gmax = gamma_range
    if not 0.0 < gmin <= gmax < 0.1:
        raise ValueError("gamma_range must lie in (0, 0.1)")
    eta = expansion_rate_eta(A)
    N_t = compute_Nt(eta, t) if N_t is None else N_t
    if isinstance(candidates, (int, np.integer)):
        ys = np.random.default_rng(seed).uniform(0.0, 1.0, (int(candidates), A.d))
    else:
        ys = np.atleast_2d(np.asarray(candidates, dtype=float))
    attempts, best = 0, (-np.inf, None)
    gamma = gmax
    while gamma >= gmin * (1 - 1e-12):
        for i, y0 in enumerate(ys):
            attempts += 1
            chart = chart_for(X, A, y0, gamma)
            cert, samp, collar = verify_chart(chart, X, A, t, N_t, density, seed)
            mm = min(min(cert.values()), min(samp.values()), collar)
            if mm > best[0]:
                best = (mm, i, gamma)
            if mm > 0:
                return DeltaSearchResult(chart, t, N_t, sorted(cert), cert, samp, min(cert.values()), collar, attempts)
        gamma *= shrink
    raise DeltaSearchFailure({"attempts": attempts, "best_margin": best[0], "best_candidate": best[1], "N_t": N_t})


# ---------------------------------------------------------------------------
# the perturbation


@dataclass(frozen=True)
class PerturbationSpec:
    chart: CylChart
    sigma: float
    psi_scale: float = 1.0  # multiplies the profile; 0 switches the perturbation off

    def __post_init__(self):
        if not -1.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1] (negative values allowed for scans)")

    @property
    def psi(self):
        return bump_psi(self.chart.gamma0)

    @property
    def psi1(self):
        return bump_psi1(self.chart.gamma0)

    def with_sigma(self, sigma):
        return PerturbationSpec(self.chart, sigma, self.psi_scale)

    @property
    def amplitude(self):
        return self.sigma * self.psi_scale


def rotation_angle(spec, coords):
    rho = np.hypot(coords[:, 0], coords[:, 1])
    zn = np.linalg.norm(coords[:, 2:], axis=1)
    return spec.amplitude * spec.psi(rho) * spec.psi1(zn)


def phi_sigma_coords(spec, coords, inverse=False):
    """Rotate (xi_u, xi_c) by +-sigma psi(rho) psi1(|zeta|); coords are chart coordinates."""
    ang = rotation_angle(spec, coords)
    if inverse:
        ang = -ang
    c, s = np.cos(ang), np.sin(ang)
    out = coords.copy()
    out[:, 0] = c * coords[:, 0] - s * coords[:, 1]
    out[:, 1] = s * coords[:, 0] + c * coords[:, 1]
    return out


def phi_sigma_jacobian_coords(spec, coords):
    """Closed-form Jacobian of phi_sigma in chart coordinates, (N, m, m)."""
    n, m = coords.shape
    xi = coords[:, :2]
    zeta = coords[:, 2:]
    rho = np.hypot(xi[:, 0], xi[:, 1])
    zn = np.linalg.norm(zeta, axis=1)
    psi, psi1 = spec.psi, spec.psi1
    amp = spec.amplitude
    ang = amp * psi(rho) * psi1(zn)
    safe_r = np.where(rho > 0, rho, 1.0)
    safe_z = np.where(zn > 0, zn, 1.0)
    g_xi = (amp * psi.deriv(rho) * psi1(zn) / safe_r)[:, None] * xi
    g_z = (amp * psi(rho) * psi1.deriv(zn) / safe_z)[:, None] * zeta
    c, s = np.cos(ang), np.sin(ang)
    R = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], 1)
    Jxi = np.column_stack([-xi[:, 1], xi[:, 0]])
    J = np.zeros((n, m, m))
    J[:, :2, :2] = np.einsum("nij,njk->nik", R, np.eye(2)[None] + np.einsum("ni,nj->nij", Jxi, g_xi))
    J[:, :2, 2:] = np.einsum("nij,nj,nk->nik", R, Jxi, g_z)
    J[:, 2:, 2:] = np.eye(m - 2)[None]
    return J


def e_block(spec, coords):
    """The 2x2 block [[A, B], [C, D]] of d phi_sigma on span(d/dxi_u, d/dxi_c)."""
    return phi_sigma_jacobian_coords(spec, coords)[:, :2, :2]


def e_block_derivatives(gamma, coords):
    """sigma-derivatives at sigma = 0 of A, B, C, D and of D twice (closed form)."""
    psi, psi1 = bump_psi(gamma), bump_psi1(gamma)
    rho = np.hypot(coords[:, 0], coords[:, 1])
    zn = np.linalg.norm(coords[:, 2:], axis=1)
    safe = np.where(rho > 0, rho, 1.0)
    cth, sth = coords[:, 0] / safe, coords[:, 1] / safe
    f = psi(rho) * psi1(zn)
    a = rho * psi.deriv(rho) * psi1(zn)
    return {
        "A1": -a * sth * cth,
        "B1": -f - a * sth**2,
        "C1": f + a * cth**2,
        "D1": a * sth * cth,
        "D2": -(f**2) - 2 * f * a * sth**2,
    }


def phi_sigma(spec, z, with_jacobian=False):
    """phi_sigma on ambient points (identity off Delta)."""
    z = np.array(np.atleast_2d(z), dtype=float)
    chart = spec.chart
    inside = chart.in_delta(z)
    out = z.copy()
    J = np.repeat(np.eye(z.shape[1])[None], len(z), axis=0) if with_jacobian else None
    if np.any(inside):
        c = chart.coords(z[inside])
        out[inside] = chart.ambient(phi_sigma_coords(spec, c))
        if with_jacobian:
            F = chart.frame
            J[inside] = np.einsum("ji,njk,kl->nil", F, phi_sigma_jacobian_coords(spec, c), F)
    return (out, J) if with_jacobian else out


def phi_sigma_inverse(spec, z):
    z = np.array(np.atleast_2d(z), dtype=float)
    inside = spec.chart.in_delta(z)
    out = z.copy()
    if np.any(inside):
        c = spec.chart.coords(z[inside])
        out[inside] = spec.chart.ambient(phi_sigma_coords(spec, c, inverse=True))
    return out


def h_t_sigma(X, A, t, spec, z, opts=None):
    """h = phi_sigma o phi^t with chain-rule Jacobian."""
    zt, Jt = flow_map(X, t, z, A, opts or FlowOptions())
    out, Jp = phi_sigma(spec, zt, with_jacobian=True)
    return out, np.einsum("nij,njk->nik", Jp, Jt)


def h_t_sigma_tube(A, t, spec, z):
    """h on points confined to the rest tube (exact flow, no integrator)."""
    return phi_sigma(spec, tube_flow(z, t, A))


def c1_distance_to_flow(A, t, chart, sigmas, n=4000, seed=0, psi_scale=1.0):
    """Grid estimate of ||h_{t sigma} - phi^t||_{C^1} per sigma on the rest tube.

    h - phi^t vanishes unless phi^t(z) lies in Delta, so the grid is z = phi^-t(w) for
    w uniform in Delta; there D(h - phi^t) = (D phi_sigma(w) - I) D phi^t(z).
    """
    from dynlab.dynamics.systems import TubeMap

    rng = np.random.default_rng(seed)
    g = chart.gamma0
    nz = len(chart.base) - 2
    w = chart.ambient(_uniform_delta_coords(rng, n, g, nz))
    tube = TubeMap(A, t)
    z, _ = tube.inverse_step(w)
    w, Dt = tube.step(z)
    out = []
    for s in sigmas:
        spec = PerturbationSpec(chart, s, psi_scale)
        img, J = phi_sigma(spec, w, with_jacobian=True)
        c0 = np.max(np.abs(chart.coords(img) - chart.coords(w)))
        c1 = np.max(np.abs(np.einsum("nij,njk->nik", J - np.eye(J.shape[1]), Dt)))
        out.append(max(float(c0), float(c1)))
    return out
