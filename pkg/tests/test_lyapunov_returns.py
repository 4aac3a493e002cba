import numpy as np
import pytest

from dynlab.analysis.lyapunov import lyapunov_spectrum, propagate
from dynlab.analysis.returns import first_return, kac_check, refine_entry_time, torus_disk_testbed
from dynlab.dynamics.systems import CircleRotation, IdentityMap, TorusMap

CAT = TorusMap(np.array([[2, 1], [1, 1]]))
GOLD = (np.sqrt(5) - 1) / 2


def test_cat_exponents_closed_form(rng):
    rep = lyapunov_spectrum(CAT, rng.uniform(size=(4, 2)), 2000, 2, seed=1)
    lam = np.log((3 + np.sqrt(5)) / 2)
    np.testing.assert_allclose(rep.exponents, [lam, -lam], atol=2e-3)
    assert abs(rep.exponent_sum - rep.mean_log_det) < 1e-9


def test_three_torus_exponents_match_eigenvalues(rng):
    M = np.array([[0, 0, 1], [1, 0, -1], [0, 1, 3]])  # det 1, characteristic x^3 - 3x^2 + x - 1
    assert round(np.linalg.det(M)) == 1
    rep = lyapunov_spectrum(TorusMap(M), rng.uniform(size=(3, 3)), 3000, 3, seed=2)
    want = np.sort(np.log(np.abs(np.linalg.eigvals(M))))[::-1]
    np.testing.assert_allclose(rep.exponents, want, atol=5e-3)
    assert abs(rep.exponent_sum) < 1e-9 and abs(rep.mean_log_det) < 1e-12


def test_identity_zero_exponents():
    rep = lyapunov_spectrum(IdentityMap(4), np.zeros((2, 4)), 1000, 4, seed=0)
    np.testing.assert_allclose(rep.exponents, 0.0, atol=1e-12)
    assert rep.cauchy_tail < 1e-12


def test_trace_converges(rng):
    rep = lyapunov_spectrum(CAT, rng.uniform(size=(2, 2)), 5000, 1, seed=0)
    assert rep.trace.shape[1] == 1
    assert rep.trace[-1, 0] == pytest.approx(rep.exponents[0])
    assert rep.cauchy_tail < 1e-3


def test_lyapunov_errors():
    with pytest.raises(ValueError):
        lyapunov_spectrum(CAT, np.zeros((1, 2)), 999, 2, seed=0)
    with pytest.raises(ValueError):
        propagate(CAT, np.zeros((1, 2)), 10, 3, seed=0)


def test_report_dict(rng):
    d = lyapunov_spectrum(CAT, rng.uniform(size=(2, 2)), 1000, 2, seed=5).to_dict()
    assert d["n_orbits"] == 2 and d["seed"] == 5 and len(d["exponents"]) == 2


def _interval(lo, hi):
    return lambda x: (x[:, 0] >= lo) & (x[:, 0] < hi)


def test_first_return_rational_rotation():
    rs = first_return(CircleRotation(1 / 7).step, _interval(0.0, 0.01), np.array([[0.005], [0.002]]), 20)
    np.testing.assert_array_equal(rs.steps, [7, 7])
    assert rs.censored_fraction == 0.0
    np.testing.assert_allclose(rs.z[:, 0], [0.005, 0.002], atol=1e-14)


def test_first_return_censoring():
    rs = first_return(CircleRotation(0.5).step, _interval(0.0, 0.1), np.array([[0.05], [0.3]]), 5)
    np.testing.assert_array_equal(rs.steps, [2, 6])
    np.testing.assert_array_equal(rs.censored, [False, True])


def test_kac_irrational_rotation():
    lo, hi = 0.2, 0.25

    def sampler(rng, n):
        return rng.uniform(lo, hi, (n, 1))

    rep = kac_check(CircleRotation(GOLD).step, _interval(lo, hi), sampler, hi - lo, 4000, seed=0)
    assert abs(rep.kac_ratio - 1) < 0.02 and rep.censored_fraction == 0.0
    assert rep.passed and rep.to_dict()["pass"]


def test_kac_cat_disk():
    in_set, sampler, measure = torus_disk_testbed([0.3, 0.7], 0.1)
    rep = kac_check(CAT.step, in_set, sampler, measure, 5000, seed=1)
    assert abs(rep.kac_ratio - 1) < 4 * rep.stderr * measure + 0.02


def test_torus_disk_sampler_inside():
    in_set, sampler, measure = torus_disk_testbed([0.95, 0.02], 0.1)
    pts = sampler(np.random.default_rng(0), 1000)
    assert np.all(in_set(pts)) and np.all((pts >= 0) & (pts < 1))
    assert measure == pytest.approx(np.pi * 0.01)
    # area by Monte Carlo on the wrapped disk
    u = np.random.default_rng(1).uniform(size=(200000, 2))
    assert abs(in_set(u).mean() - measure) < 4 * np.sqrt(measure / 200000)


def test_refine_entry_time():
    def flow(z, s):
        return z + s

    t = refine_entry_time(flow, lambda z: z[:, 0] >= 0.3, np.array([[0.25], [0.29]]), 0.1, tol=1e-12)
    np.testing.assert_allclose(t, [0.05, 0.01], atol=1e-11)
