"""Block-diagonal hyperbolic toral automorphisms."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

CAT = np.array([[2, 1], [1, 1]], dtype=np.int64)
BLOCK3 = np.array([[2, 1, 1], [1, 1, 1], [0, 1, 2]], dtype=np.int64)


@dataclass(frozen=True)
class ToralAutomorphism:
    """y -> A y mod 1 with A = diag(A_1, ..., A_m') on T^(m-3)."""

    m: int

    def __post_init__(self):
        if self.m < 5:
            raise ValueError("m must be >= 5")

    @property
    def d(self):
        return self.m - 3

    @property
    def m_prime(self):
        return (self.m - 3) // 2

    @property
    def blocks(self):
        n_cat = self.m_prime if self.m % 2 else self.m_prime - 1
        last = [BLOCK3] if self.m % 2 == 0 else []
        return [CAT] * n_cat + last

    @property
    def matrix(self):
        return block_diag(*self.blocks).astype(np.int64)

    @property
    def matrix_inv(self):
        # every block is unimodular, so the inverse is integral
        return np.rint(np.linalg.inv(self.matrix)).astype(np.int64)

    @property
    def last_block_offset(self):
        return self.d - self.blocks[-1].shape[0]

    def apply(self, y, power=1):
        y = np.asarray(y, dtype=float)
        M = self.matrix if power >= 0 else self.matrix_inv
        for _ in range(abs(power)):
            y = np.mod(y @ M.T, 1.0)
        return y

    def derivative(self):
        return self.matrix.astype(float)

    def unstable_direction(self):
        """Unit vector (in R^d) along the chosen expanding line of the last block."""
        B = self.blocks[-1].astype(float)
        vals, vecs = np.linalg.eig(B)
        i = int(np.argmax(np.abs(vals)))
        v = np.real(vecs[:, i])
        v = v / np.linalg.norm(v)
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        out = np.zeros(self.d)
        out[self.last_block_offset:] = v
        return out

    def eigen_moduli(self):
        return np.sort(np.abs(np.linalg.eigvals(self.matrix.astype(float))))


def toral_apply(A, y):
    return A.apply(y)


def toral_derivative(A):
    return A.derivative()


def expansion_rate_eta(A):
    """Largest eigenvalue modulus of the last block (the expansion along the chosen line)."""
    return float(np.max(np.abs(np.linalg.eigvals(A.blocks[-1].astype(float)))))


def check_hyperbolic(A, tol=1e-9):
    """(det == 1 for every block, no eigenvalue modulus within tol of 1)."""
    dets_ok = all(abs(np.linalg.det(b.astype(float)) - 1.0) < 1e-12 for b in A.blocks)
    mods = A.eigen_moduli()
    return dets_ok and bool(np.all(np.abs(mods - 1.0) > tol))
