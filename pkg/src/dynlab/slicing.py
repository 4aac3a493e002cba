"""Cube slicing: slab boundaries, affine slab maps, the assembled map and its C^r bookkeeping."""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from dynlab._fd import partial
from dynlab.dynamics.distance import cr_distance_to_identity
from dynlab.flatness import CUBE, DEFAULT_C, default_admissible as _default_family, is_rho_flat

INF = "inf"
K_MAX_DEFAULT = 8


def slab_boundaries(ell, k_max=K_MAX_DEFAULT):
    """a_0 = -1 < a_1 < ...; for ell = INF the list stops at a_{k_max} and [a_{k_max}, 1] is an identity tail."""
    if ell == INF:
        n = k_max
        return [-1.0] + [1.0 - 2.0 ** (-k + 1) for k in range(1, n + 1)]
    ell = int(ell)
    if ell < 1:
        raise ValueError("ell must be >= 1")
    return [-1.0] + [1.0 - 2.0 ** (-k + 1) for k in range(1, ell)] + [1.0]


# ---------------------------------------------------------------------------
# block maps


@njit(cache=True)
def _edge(x, width):
    """e(x) = S((1 - x^2) / width) and e'(x)."""
    u = (1.0 - x * x) / width
    if u <= 0.0:
        return 0.0, 0.0
    if u >= 1.0:
        return 1.0, 0.0
    w = 1.0 / u - 1.0 / (1.0 - u)
    if w > 0:
        t = math.exp(-w)
        s = t / (1.0 + t)
    else:
        s = 1.0 / (1.0 + math.exp(w))
    ds = s * (1.0 - s) * (1.0 / u**2 + 1.0 / (1.0 - u) ** 2)
    return s, ds * (-2.0 * x / width)


@njit(cache=True)
def _edge2(x, width):
    """e''(x) by central difference of e' (only used for the variational equations)."""
    h = 1e-6
    return (_edge(x + h, width)[1] - _edge(x - h, width)[1]) / (2 * h)


@njit(cache=True)
def _shear_field(xi, xj, amp, width, phase):
    ei, dei = _edge(xi, width)
    ej, dej = _edge(xj, width)
    sn, cs = math.sin(math.pi * (xj - phase)), math.cos(math.pi * (xj - phase))
    A = ej * sn
    dA = dej * sn + ej * math.pi * cs
    return amp * dA * ei, -amp * A * dei


@njit(cache=True)
def _shear_jac(xi, xj, amp, width, phase):
    """d(v_i, v_j)/d(x_i, x_j) of the pair field."""
    ei, dei = _edge(xi, width)
    ej, dej = _edge(xj, width)
    d2ei, d2ej = _edge2(xi, width), _edge2(xj, width)
    sn, cs = math.sin(math.pi * (xj - phase)), math.cos(math.pi * (xj - phase))
    A = ej * sn
    dA = dej * sn + ej * math.pi * cs
    d2A = d2ej * sn + 2 * dej * math.pi * cs - ej * math.pi**2 * sn
    return amp * dA * dei, amp * d2A * ei, -amp * A * d2ei, -amp * dA * dei


@njit(cache=True)
def _midpoint_step(a, b, h, amp, width, phase):
    """Implicit midpoint step (symplectic, self-adjoint) solved by Newton; returns (a', b', M at the midpoint)."""
    va, vb = _shear_field(a, b, amp, width, phase)
    a1, b1 = a + h * va, b + h * vb
    for _ in range(12):
        ma, mb = 0.5 * (a + a1), 0.5 * (b + b1)
        va, vb = _shear_field(ma, mb, amp, width, phase)
        ra, rb = a1 - a - h * va, b1 - b - h * vb
        m00, m01, m10, m11 = _shear_jac(ma, mb, amp, width, phase)
        j00, j01, j10, j11 = 1.0 - 0.5 * h * m00, -0.5 * h * m01, -0.5 * h * m10, 1.0 - 0.5 * h * m11
        det = j00 * j11 - j01 * j10
        da = (j11 * ra - j01 * rb) / det
        db = (-j10 * ra + j00 * rb) / det
        a1 -= da
        b1 -= db
        if abs(da) + abs(db) < 1e-16:
            break
    ma, mb = 0.5 * (a + a1), 0.5 * (b + b1)
    return a1, b1, ma, mb


@njit(cache=True)
def _shear_kernel(x, omega, width, substeps, sign, with_jac):
    n, dim = x.shape
    out = x.copy()
    jac = np.zeros((n, dim, dim))
    h = sign / substeps
    inner = math.sqrt(1.0 - width)  # |x_i| <= inner: e == 1, e' == 0, field constant in x_i
    for p in range(n):
        J = np.eye(dim)
        for q in range(dim):  # dim 2: pairs (0,1) then (1,0)
            qq = q if sign > 0 else dim - 1 - q
            i = qq
            j = (qq + 1) % dim
            phase = 0.37 * qq
            amp = omega
            for l in range(dim):
                if l != i and l != j:
                    amp *= _edge(out[p, l], width)[0]
            if amp == 0.0:
                continue
            a, b = out[p, i], out[p, j]
            G = np.zeros((2, dim))  # d(a, b)/d(coordinates at the start of this pair flow)
            G[0, i] = 1.0
            G[1, j] = 1.0
            k = 0
            while k < substeps:
                if not with_jac and abs(a) <= inner:
                    # interior: constant shear, the midpoint rule is exact; jump substeps that stay inside
                    v, _ = _shear_field(a, b, amp, width, phase)
                    if v != 0.0:
                        room = inner - a if v * h > 0 else a + inner
                        jump = min(substeps - k, int(room / abs(v * h)))
                    else:
                        jump = substeps - k
                    if jump > 0:
                        a += jump * h * v
                        k += jump
                        continue
                a1, b1, ma, mb = _midpoint_step(a, b, h, amp, width, phase)
                if with_jac:
                    # (I - h M / 2) G' = (I + h M / 2) G + h dv/d(frozen)
                    m00, m01, m10, m11 = _shear_jac(ma, mb, amp, width, phase)
                    va, vb = _shear_field(ma, mb, amp, width, phase)
                    Bm = _amp_grad(va, vb, out[p], i, j, width, dim)
                    L = np.array([[1.0 - 0.5 * h * m00, -0.5 * h * m01], [-0.5 * h * m10, 1.0 - 0.5 * h * m11]])
                    R = np.array([[1.0 + 0.5 * h * m00, 0.5 * h * m01], [0.5 * h * m10, 1.0 + 0.5 * h * m11]])
                    G[:, :] = np.linalg.solve(L, R @ G + h * Bm)
                a, b = a1, b1
                k += 1
            out[p, i], out[p, j] = a, b
            if with_jac:
                P = np.eye(dim)
                P[i, :] = G[0]
                P[j, :] = G[1]
                J = P @ J
        jac[p] = J
    return out, jac


@njit(cache=True)
def _amp_grad(va, vb, z, i, j, width, dim):
    """d v / d(frozen coordinates): v * d log(prod e(x_l)) / d x_l."""
    out = np.zeros((2, dim))
    for l in range(dim):
        if l != i and l != j:
            e, de = _edge(z[l], width)
            if e > 0.0:
                out[0, l] = va * de / e
                out[1, l] = vb * de / e
    return out


@dataclass(frozen=True)
class ShearBlock:
    """Volume-preserving flat map of [-1, 1]^dim: time-1 maps of the pair Hamiltonians
    H_ij = omega e(x_i) A(x_j) prod_{l != i, j} e(x_l), A(x) = e(x) sin(pi (x - phase_ij)),
    for the cyclic pairs (0,1), (1,2), ..., (dim-1, 0).

    e(x) = S((1 - x^2) / width) is 1 on |x| <= sqrt(1 - width) and vanishes to infinite
    order at +-1. Away from the walls each flow is the shear x_i += omega A'(x_j) t; in the
    wall layers the streamlines turn back, so the flows are tangent to all faces and the
    map is the identity to all orders on the boundary. Alternating shears mix like the
    sine flow on the torus. Each pair flow is integrated with ``substeps`` implicit midpoint
    steps: symplectic, so every pair map has unit Jacobian, and self-adjoint, so the inverse
    is the same scheme run backwards.
    """

    dim: int = 3
    omega: float = 0.5
    width: float = 0.3
    substeps: int = 120

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")

    def _apply(self, x, sign, with_jac=False):
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=float)
        return _shear_kernel(x, float(self.omega), float(self.width), int(self.substeps), float(sign), with_jac)

    def __call__(self, x):
        return self._apply(x, 1.0)[0]

    def inverse(self, x):
        return self._apply(x, -1.0)[0]

    def jacobian(self, x):
        """(image, Jacobian) via the variational equations."""
        return self._apply(x, 1.0, True)


@dataclass(frozen=True)
class IdentityBlock:
    dim: int = 3

    def __call__(self, x):
        return np.array(np.atleast_2d(x), dtype=float)

    inverse = __call__


# ---------------------------------------------------------------------------
# slicing


@dataclass
class SliceSpec:
    ell: object = 3  # positive int or INF
    dim: int = 3
    k_max: int = K_MAX_DEFAULT
    blocks: list = field(default_factory=list)  # f_1, f_2, ...; empty -> default twist blocks
    omega: float = 0.5
    width: float = 0.3

    def __post_init__(self):
        if self.ell != INF and int(self.ell) < 1:
            raise ValueError("ell must be >= 1")
        self.a = slab_boundaries(self.ell, self.k_max)
        if not self.blocks:
            self.blocks = [ShearBlock(self.dim, self.omega, self.width) for _ in range(self.n_slabs)]
        if len(self.blocks) != self.n_slabs:
            raise ValueError("need one block map per slab")

    @property
    def n_slabs(self):
        return len(self.a) - 1

    @property
    def scales(self):
        """Slab-exact affine scale (a_k - a_{k-1}) / 2 per slab."""
        return [(self.a[k] - self.a[k - 1]) / 2 for k in range(1, self.n_slabs + 1)]

    @property
    def upper(self):
        """Top of the region covered by the slabs (1, or a_{k_max} for the truncated infinite case)."""
        return self.a[-1]

    def slab_of(self, xm):
        """Slab index k (1-based) of last coordinates; 0 for the identity tail."""
        xm = np.asarray(xm, dtype=float)
        k = np.searchsorted(np.asarray(self.a[1:-1]), xm, side="right") + 1
        return np.where(xm > self.upper, 0, k)

    def to_dict(self):
        return {"ell": self.ell, "dim": self.dim, "k_max": self.k_max, "omega": self.omega, "width": self.width,
                "a": self.a, "scales": self.scales}


def _check_k(spec, k):
    if not 1 <= k <= spec.n_slabs:
        raise ValueError(f"slab index {k} out of range 1..{spec.n_slabs}")


def pi_k(spec, k, x):
    """Identity on the first coordinates, last coordinate onto [a_{k-1}, a_k]."""
    _check_k(spec, k)
    x = np.array(np.atleast_2d(x), dtype=float)
    x[:, -1] = spec.a[k - 1] + spec.scales[k - 1] * (x[:, -1] + 1.0)
    return x


def pi_k_inverse(spec, k, x):
    _check_k(spec, k)
    x = np.array(np.atleast_2d(x), dtype=float)
    x[:, -1] = (x[:, -1] - spec.a[k - 1]) / spec.scales[k - 1] - 1.0
    return x


@dataclass
class SlicedMap:
    spec: SliceSpec

    @property
    def dim(self):
        return self.spec.dim

    def _go(self, x, inverse):
        x = np.array(np.atleast_2d(x), dtype=float)
        out = x.copy()
        k = self.spec.slab_of(x[:, -1])
        for kk in np.unique(k):
            if kk == 0:
                continue
            sel = k == kk
            f = self.spec.blocks[kk - 1]
            y = pi_k_inverse(self.spec, kk, x[sel])
            # x + scaled block displacement: exact where the block fixes y
            d = (f.inverse(y) if inverse else f(y)) - y
            d[:, -1] *= self.spec.scales[kk - 1]
            out[sel] += d
        return out

    def __call__(self, x):
        return self._go(x, False)

    def inverse(self, x):
        return self._go(x, True)

    def step(self, x):
        return self(x)


def build_sliced_map(spec, rho=None, check_flatness=True, n_max=3, grid=None):
    """Assemble F = pi_k o f_k o pi_k^-1 on each slab after checking f_k - id is rho^k-flat."""
    reports = []
    if check_flatness:
        rho = rho or default_admissible(spec.dim)
        for k, f in enumerate(spec.blocks, start=1):
            rep = is_rho_flat(lambda x, f=f: f(x) - x, rho.scale_by(k), n_max=n_max, grid=grid)
            reports.append(rep)
            if not rep.passed:
                raise FlatnessGateError(k, rep)
    return SlicedMap(spec), reports


class FlatnessGateError(RuntimeError):
    def __init__(self, k, report):
        super().__init__(f"block {k} is not rho^{k}-flat (failing order {report.failing_order})")
        self.k, self.report = k, report


def default_admissible(dim, c=DEFAULT_C):
    return _default_family(CUBE, dim, c)


# ---------------------------------------------------------------------------
# C^r bookkeeping


def epsilon_budget(k, epsilon, r, C):
    """(eps_k, r_k, scale of rho^k) with eps_k = eps / C * 4^(-k^2 r), r_k = k r, scale 2^-k."""
    if epsilon <= 0 or r < 1 or C <= 0:
        raise ValueError("need epsilon > 0, r >= 1, C > 0")
    return epsilon / C * 4.0 ** (-(k**2) * r), k * r, 2.0 ** (-k)


def schedule_check(epsilon, r, C, k_max=K_MAX_DEFAULT):
    """(2^k)^{kr} eps_k per k, the closed form eps/C 2^{-k^2 r}, and the sup over k."""
    rows = []
    for k in range(1, k_max + 1):
        eps_k, r_k, _ = epsilon_budget(k, epsilon, r, C)
        rows.append({"k": k, "eps_k": eps_k, "r_k": r_k, "scaled": 2.0 ** (k * r_k) * eps_k,
                     "closed_form": epsilon / C * 2.0 ** (-(k**2) * r)})
    sup = max(row["scaled"] for row in rows)
    tail = epsilon / C * 2.0 ** (-(k_max**2) * r)
    return {"rows": rows, "sup": sup, "bound": epsilon / C, "truncation_bound": tail}


@dataclass
class SlabNormCheck:
    k: int
    order: int
    F_norm: float
    f_norm: float
    factor: float  # (2^k)^{kr}

    @property
    def passed(self):
        return self.F_norm <= self.factor * self.f_norm * (1 + 1e-9) + 1e-12

    def to_dict(self):
        return {**self.__dict__, "pass": self.passed}


def check_slab_norms(F, spec, k, r=1, n_grid=64, seed=0, h=1e-3):
    """||F|slab_k - id||_{C^{kr}} against (2^k)^{kr} ||f_k - id||_{C^{kr}} on matched grids.

    The slab grid is pi_k of the block grid, and the last-axis FD step is scaled by the
    slab factor, so both norms use the same stencil geometry.
    """
    order = k * r
    rng = np.random.default_rng(seed)
    grid = rng.uniform(-0.9, 0.9, (n_grid, spec.dim))
    f = spec.blocks[k - 1]
    s = spec.scales[k - 1]
    hf = np.full(spec.dim, h)
    hF = hf.copy()
    hF[-1] *= s
    f_norm = cr_distance_to_identity(f, order, grid, h=hf).value
    F_norm = cr_distance_to_identity(F, order, pi_k(spec, k, grid), h=hF).value
    return SlabNormCheck(k, order, F_norm, f_norm, 2.0 ** (k * order))


def jacobian_det(fmap, x, h=1e-5):
    """det of the FD Jacobian of a map at points x."""
    x = np.atleast_2d(x)
    dim = x.shape[1]
    cols = []
    for j in range(dim):
        alpha = tuple(1 if i == j else 0 for i in range(dim))
        cols.append(partial(fmap, x, alpha, h))
    J = np.stack(cols, axis=2)
    return np.linalg.det(J)


def slab_volume_check(spec, n=256, seed=0):
    """max |det DF - 1| per slab; the affine conjugation leaves det DF equal to det Df_k."""
    rng = np.random.default_rng(seed)
    out = []
    for f in spec.blocks:
        x = rng.uniform(-1.0, 1.0, (n, spec.dim))
        J = f.jacobian(x)[1] if hasattr(f, "jacobian") else None
        det = np.linalg.det(J) if J is not None else jacobian_det(f, x)
        out.append(float(np.max(np.abs(det - 1.0))))
    return out


def slab_sampler(spec, k=None):
    """Uniform points of the cube (or of slab k) for seeding orbits."""

    def sample(rng, n):
        x = rng.uniform(-1.0, 1.0, (n, spec.dim))
        if k is not None:
            x[:, -1] = rng.uniform(spec.a[k - 1], spec.a[k], n)
        return x

    return sample


def slab_centroids(spec):
    """Mean of the last coordinate over each slab (uniform measure)."""
    return [0.5 * (spec.a[k - 1] + spec.a[k]) for k in range(1, spec.n_slabs + 1)]


def drift_check(F, spec, n_orbits=100, n_steps=10000, seed=0):
    """Max excursion of the last coordinate beyond the starting slab's bounds."""
    rng = np.random.default_rng(seed)
    x = slab_sampler(spec)(rng, n_orbits)
    k = spec.slab_of(x[:, -1])
    lo = np.array([spec.a[kk - 1] if kk else spec.upper for kk in k])
    hi = np.array([spec.a[kk] if kk else 1.0 for kk in k])
    worst = 0.0
    for _ in range(n_steps):
        x = F(x)
        ex = np.maximum(lo - x[:, -1], x[:, -1] - hi)
        worst = max(worst, float(ex.max()))
    return max(worst, 0.0)

