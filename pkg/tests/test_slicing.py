from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynlab.analysis.ergodic import birkhoff_averages
from dynlab.slicing import (
    INF,
    FlatnessGateError,
    ShearBlock,
    SlicedMap,
    SliceSpec,
    build_sliced_map,
    check_slab_norms,
    drift_check,
    epsilon_budget,
    jacobian_det,
    pi_k,
    pi_k_inverse,
    schedule_check,
    slab_boundaries,
    slab_centroids,
    slab_sampler,
    slab_volume_check,
)

BLOCK = ShearBlock()


def test_slab_boundaries():
    assert slab_boundaries(1) == [-1.0, 1.0]
    assert slab_boundaries(3) == [-1.0, 0.0, 0.5, 1.0]
    assert slab_boundaries(INF, k_max=4) == [-1.0, 0.0, 0.5, 0.75, 0.875]
    with pytest.raises(ValueError):
        slab_boundaries(0)


def test_spec_scales_and_slab_of():
    spec = SliceSpec(3)
    assert spec.n_slabs == 3 and spec.scales == [0.5, 0.25, 0.25]
    np.testing.assert_array_equal(spec.slab_of([-1.0, -0.2, 0.0, 0.7, 1.0]), [1, 1, 2, 3, 3])
    inf = SliceSpec(INF, k_max=4)
    assert inf.upper == 0.875
    np.testing.assert_array_equal(inf.slab_of([0.8, 0.9]), [4, 0])
    assert slab_centroids(spec) == [-0.5, 0.25, 0.75]
    with pytest.raises(ValueError):
        SliceSpec(3, blocks=[BLOCK])


def test_pi_k_endpoints():
    spec = SliceSpec(3)
    for k in (1, 2, 3):
        ends = pi_k(spec, k, np.array([[0.3, 0.1, -1.0], [0.3, 0.1, 1.0]]))
        np.testing.assert_array_equal(ends[:, -1], [spec.a[k - 1], spec.a[k]])
        np.testing.assert_array_equal(ends[:, :2], [[0.3, 0.1]] * 2)
    with pytest.raises(ValueError):
        pi_k(spec, 4, np.zeros((1, 3)))


@given(st.integers(1, 6), st.floats(-1, 1), st.floats(-1, 1))
def test_pi_k_roundtrip(k, a, b):
    spec = SliceSpec(INF, k_max=6, blocks=[BLOCK] * 6)
    x = np.array([[a, 0.0, b]])
    np.testing.assert_allclose(pi_k_inverse(spec, k, pi_k(spec, k, x)), x, atol=1e-12)


def test_shear_block_volume_and_inverse(rng):
    x = rng.uniform(-1, 1, (300, 3))
    y, J = BLOCK.jacobian(x)
    assert np.max(np.abs(np.linalg.det(J) - 1)) < 1e-9
    np.testing.assert_allclose(BLOCK.inverse(y), x, atol=1e-10)
    # the plain path jumps across the region where the field is constant
    np.testing.assert_allclose(y, BLOCK(x), atol=1e-12)
    assert np.max(np.abs(y - x)) > 0.1  # the block moves points
    assert np.all(np.abs(y) <= 1)


def test_shear_block_fixes_boundary(rng):
    x = rng.uniform(-1, 1, (200, 3))
    for axis in range(3):
        for side in (-1.0, 1.0):
            xb = x.copy()
            xb[:, axis] = side
            np.testing.assert_allclose(BLOCK(xb), xb, atol=1e-15)
            _, J = BLOCK.jacobian(xb)
            np.testing.assert_allclose(J, np.eye(3)[None].repeat(200, 0), atol=1e-12)


def test_shear_block_jacobian_vs_fd(rng):
    x = rng.uniform(-0.95, 0.95, (40, 3))
    _, J = BLOCK.jacobian(x)

    def err(h):
        fd = np.stack([(BLOCK(x + h * e) - BLOCK(x - h * e)) / (2 * h) for e in np.eye(3)], -1)
        return np.abs(fd - J).max(axis=(1, 2)) / (1 + np.abs(J).max(axis=(1, 2)))

    assert err(1e-7).max() < 2e-7
    # central differences converge to the variational Jacobian at second order
    e4, e5 = err(1e-4), err(1e-5)
    big = e5 > 1e-7
    assert big.any() and np.all(e4[big] / e5[big] > 30)


@pytest.mark.parametrize("dim", [2, 4])
def test_shear_block_other_dims(dim, rng):
    blk = ShearBlock(dim)
    x = rng.uniform(-1, 1, (50, dim))
    _, J = blk.jacobian(x)
    assert np.max(np.abs(np.linalg.det(J) - 1)) < 1e-9
    np.testing.assert_allclose(blk.inverse(blk(x)), x, atol=1e-10)
    with pytest.raises(ValueError):
        ShearBlock(1)


def test_jacobian_det_fd_helper(rng):
    M = np.array([[2.0, 1.0, 0.0], [0.0, 1.0, 3.0], [1.0, 0.0, 1.0]])
    x = rng.uniform(-1, 1, (5, 3))
    np.testing.assert_allclose(jacobian_det(lambda z: z @ M.T, x), np.linalg.det(M), rtol=1e-9)


@pytest.fixture(scope="module")
def sliced():
    return SlicedMap(SliceSpec(3))


def test_sliced_map_keeps_slabs(sliced, rng):
    spec = sliced.spec
    x = slab_sampler(spec)(rng, 300)
    k0 = spec.slab_of(x[:, -1])
    for _ in range(20):
        x = sliced(x)
        np.testing.assert_array_equal(spec.slab_of(x[:, -1]), k0)
    assert drift_check(sliced, spec, n_orbits=20, n_steps=50) == 0.0


def test_sliced_map_inverse(sliced, rng):
    x = rng.uniform(-1, 1, (200, 3))
    np.testing.assert_allclose(sliced.inverse(sliced(x)), x, atol=1e-10)


def test_sliced_map_is_conjugate_block(sliced, rng):
    spec = sliced.spec
    for k in (1, 2, 3):
        x = slab_sampler(spec, k)(rng, 50)
        want = pi_k(spec, k, BLOCK(pi_k_inverse(spec, k, x)))
        np.testing.assert_allclose(sliced(x), want, atol=1e-14)


def test_infinite_tail_identity(rng):
    spec = SliceSpec(INF, k_max=4)
    F = SlicedMap(spec)
    x = rng.uniform(-1, 1, (100, 3))
    x[:, -1] = rng.uniform(spec.upper, 1.0, 100)
    np.testing.assert_array_equal(F(x), x)


def test_slab_indicator_averages(sliced, rng):
    spec = sliced.spec
    obs = [(lambda z, k=k: (spec.slab_of(z[:, -1]) == k).astype(float)) for k in (1, 2, 3)]
    x = slab_sampler(spec)(rng, 30)
    avg = birkhoff_averages(sliced.step, obs, x, 100)
    np.testing.assert_array_equal(avg, np.eye(3)[spec.slab_of(x[:, -1]) - 1])


@dataclass(frozen=True)
class _Shift:
    """Translation by a constant: moves the boundary, so it is not flat at order 0."""

    def __call__(self, x):
        return np.atleast_2d(x) + 0.01

    def inverse(self, x):
        return np.atleast_2d(x) - 0.01


def test_flatness_gate_rejects_non_flat_block():
    with pytest.raises(FlatnessGateError) as info:
        build_sliced_map(SliceSpec(2, blocks=[BLOCK, _Shift()]), n_max=1)
    assert info.value.k == 1 or info.value.k == 2
    assert info.value.report.failing_order == 0


def test_flatness_gate_accepts_default_blocks():
    F, reports = build_sliced_map(SliceSpec(2), n_max=1)
    assert isinstance(F, SlicedMap) and len(reports) == 2 and all(r.passed for r in reports)


def test_epsilon_budget():
    eps_k, r_k, scale = epsilon_budget(1, 0.1, 1, 1)
    assert eps_k == pytest.approx(0.025) and r_k == 1 and scale == 0.5
    eps_k, r_k, scale = epsilon_budget(2, 0.1, 2, 4)
    assert eps_k == pytest.approx(0.1 / 4 * 4.0**-8) and r_k == 4 and scale == 0.25
    with pytest.raises(ValueError):
        epsilon_budget(1, 0.0, 1, 1)


@given(st.floats(1e-3, 10), st.integers(1, 3), st.floats(0.5, 10))
def test_schedule_bound(eps, r, C):
    s = schedule_check(eps, r, C, k_max=6)
    assert s["sup"] <= s["bound"]
    for row in s["rows"]:
        assert row["scaled"] == pytest.approx(row["closed_form"], rel=1e-12)
    assert s["sup"] == pytest.approx(eps / C * 2.0**-r)


def test_slab_norms_first_order(sliced):
    chk = check_slab_norms(sliced, sliced.spec, 1, n_grid=16)
    assert chk.order == 1 and chk.factor == 2.0
    assert chk.passed and chk.to_dict()["pass"]


def test_slab_volume_check():
    vals = slab_volume_check(SliceSpec(2), n=64)
    assert len(vals) == 2 and max(vals) < 1e-9
