import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynlab.dynamics import ToralAutomorphism
from dynlab.geometry import (
    DiskPoint,
    SuspensionPoint,
    TorusPoint,
    expected_dims,
    from_cylindrical,
    normalize_suspension,
    to_cylindrical,
)

A5 = ToralAutomorphism(5)


def test_point_validation():
    DiskPoint(0.6, 0.8)
    with pytest.raises(ValueError):
        DiskPoint(0.8, 0.8)
    with pytest.raises(ValueError):
        TorusPoint((0.2, 1.0))
    with pytest.raises(ValueError):
        SuspensionPoint(DiskPoint(0, 0), TorusPoint((0.1, 0.2)), 1.0)
    assert TorusPoint.wrap([1.25, -0.25]).y == (0.25, 0.75)


def test_suspension_from_array_normalizes():
    p = SuspensionPoint.from_array([0.1, 0.2, 0.3, 0.4, 1.5], A5)
    y = np.mod(A5.matrix @ np.array([0.3, 0.4]), 1.0)
    np.testing.assert_allclose(p.y.array, y, atol=1e-15)
    assert p.tau == 0.5
    np.testing.assert_allclose(p.array[:2], [0.1, 0.2])


def test_normalize_gluing_rule():
    y = np.array([0.3, 0.4])
    y1, t1 = normalize_suspension(y, 1.0, A5)
    np.testing.assert_allclose(y1, np.mod(A5.matrix @ y, 1.0), atol=1e-15)
    assert t1 == 0.0
    y2, t2 = normalize_suspension(y, -0.25, A5)
    np.testing.assert_allclose(y2, np.mod(A5.matrix_inv @ y, 1.0), atol=1e-15)
    assert t2 == 0.75
    with pytest.raises(ValueError):
        normalize_suspension(y, np.nan, A5)


def test_normalize_tiny_negative_tau():
    _, t = normalize_suspension(np.array([0.1, 0.1]), -1e-18, A5)
    assert 0.0 <= t < 1.0


@given(st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=6), st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_normalize_batch_matches_scalar(taus, y1, y2):
    taus = np.array(taus)
    ys = np.tile([y1, y2], (len(taus), 1))
    yb, tb = normalize_suspension(ys, taus, A5)
    assert np.all((tb >= 0) & (tb < 1))
    for i, tau in enumerate(taus):
        ys_, ts_ = normalize_suspension(ys[i], tau, A5)
        np.testing.assert_array_equal(yb[i], ys_)
        assert tb[i] == ts_


@pytest.mark.parametrize("m", range(5, 12))
def test_expected_dims(m):
    s, c, u = expected_dims(m)
    assert s + c + u == m
    assert c == 1 and s >= 2 and u >= 2


def test_chart_frame_orthonormal(chart5):
    F = chart5.frame
    np.testing.assert_allclose(F @ F.T, np.eye(5), atol=1e-14)
    np.testing.assert_allclose(chart5.axis_c, [0, 0, 0, 0, 1], atol=1e-14)


def test_chart_coords_roundtrip(chart5, rng):
    c = rng.uniform(-0.03, 0.03, (200, 5))
    z = chart5.ambient(c)
    np.testing.assert_allclose(chart5.coords(z), c, atol=1e-14)


def test_chart_lifts_across_gluing(system5):
    from dynlab.perturbation import chart_for

    A, X = system5
    ch = chart_for(X, A, [0.3, 0.6], 0.04, tau0=0.99)
    z = ch.base + 0.02 * ch.axis_c  # crosses tau = 1
    y, tau = normalize_suspension(z[2:-1], z[-1], A)
    zn = np.concatenate([z[:2], y, [tau]])
    np.testing.assert_allclose(ch.coords(zn[None])[0], [0, 0.02, 0, 0, 0], atol=1e-13)


def test_cylindrical_roundtrip(chart5, rng):
    rho = rng.uniform(0, 0.04, 50)
    th = rng.uniform(0, 2 * np.pi, 50)
    zeta = rng.uniform(-0.03, 0.03, (50, 3))
    r2, t2, z2 = to_cylindrical(chart5, from_cylindrical(chart5, rho, th, zeta))
    np.testing.assert_allclose(r2, rho, atol=1e-14)
    np.testing.assert_allclose(np.cos(t2 - th), 1.0, atol=1e-9)
    np.testing.assert_allclose(z2, zeta, atol=1e-14)
    assert np.all((t2 >= 0) & (t2 < 2 * np.pi))


def test_cylindrical_outside_chart(chart5):
    with pytest.raises(ValueError):
        to_cylindrical(chart5, chart5.base[None] + [0.5, 0, 0, 0, 0])


def test_in_delta(chart5):
    c = np.array([[0.039, 0, 0.039, 0, 0], [0.041, 0, 0, 0, 0], [0, 0, 0.03, 0.03, 0]])
    np.testing.assert_array_equal(chart5.in_delta(chart5.ambient(c)), [True, False, False])
