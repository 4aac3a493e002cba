import numpy as np
import pytest

from dynlab.analysis.splitting import estimate_splitting
from dynlab.dynamics import ToralAutomorphism
from dynlab.dynamics.systems import TubeMap
from dynlab.geometry import expected_dims
from dynlab.perturbation import tube_splitting


def _principal_cos(U, V):
    qu, _ = np.linalg.qr(U)
    qv, _ = np.linalg.qr(V)
    return np.linalg.svd(qu.T @ qv, compute_uv=False).min()


@pytest.mark.parametrize("m", [5, 6, 7])
def test_tube_map_splitting(m):
    A = ToralAutomorphism(m)
    z = np.concatenate([[0.0, 0.0], np.full(A.d, 0.3), [0.5]])
    est = estimate_splitting(TubeMap(A), z, horizon=200)
    ns, nc, nu, nn = est.dims
    exact = tube_splitting(A, None)
    assert (ns, nc, nu, nn) == exact.dims
    # disk directions are neutral, so the fiber+flow part matches the expected counts less the disk
    s, c, u = expected_dims(m)
    assert ns + nc + nu + nn == m and nc == c
    assert _principal_cos(est.Eu, exact.Eu) > 1 - 1e-8
    assert _principal_cos(est.Es, exact.Es) > 1 - 1e-8
    assert est.lam_p == pytest.approx(1.0) and est.mu_p == pytest.approx(1.0)
    assert est.mu == pytest.approx(exact.mu, rel=0.02)
    assert est.rates_ordered(tol=1e-9)


def test_horizon_error():
    with pytest.raises(ValueError):
        estimate_splitting(TubeMap(ToralAutomorphism(5)), np.zeros(5), 0)
