import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynlab.dynamics import DiskFlowField, ToralAutomorphism, expansion_rate_eta, field_X
from dynlab.dynamics.distance import cr_distance_to_identity
from dynlab.dynamics.integrate import FlowOptions, IntegrationError, flow_map, glue, tube_flow
from dynlab.dynamics.slowed import LAMBDA, SlowedToralMap
from dynlab.dynamics.systems import CircleRotation, IdentityMap, TorusMap, TubeMap
from dynlab.dynamics.toral import BLOCK3, CAT, check_hyperbolic
from dynlab.flatness import bump_alpha

PHI2 = (3 + math.sqrt(5)) / 2


def disk_points(rng, n, radius=1.0):
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


# toral automorphisms


@pytest.mark.parametrize("m", [5, 6, 7, 8, 9])
def test_toral_blocks_are_unimodular_and_hyperbolic(m):
    A = ToralAutomorphism(m)
    assert A.matrix.shape == (m - 3, m - 3)
    assert round(np.linalg.det(A.matrix)) == 1
    np.testing.assert_array_equal(A.matrix @ A.matrix_inv, np.eye(m - 3, dtype=np.int64))
    assert check_hyperbolic(A)
    np.testing.assert_allclose(np.prod(A.eigen_moduli()), 1.0, rtol=1e-12)


def test_toral_rejects_small_m():
    with pytest.raises(ValueError):
        ToralAutomorphism(4)


def test_cat_eigenvalues_and_eta():
    vals = np.sort(np.linalg.eigvals(CAT.astype(float)))
    np.testing.assert_allclose(vals, [(3 - math.sqrt(5)) / 2, PHI2])
    assert expansion_rate_eta(ToralAutomorphism(5)) == pytest.approx(PHI2)


def test_eta_for_even_m_is_largest_characteristic_root():
    # characteristic polynomial of the 3x3 block from its trace invariants
    B = BLOCK3.astype(float)
    c2 = 0.5 * (np.trace(B) ** 2 - np.trace(B @ B))
    roots = np.roots([1, -np.trace(B), c2, -np.linalg.det(B)])
    assert expansion_rate_eta(ToralAutomorphism(6)) == pytest.approx(max(abs(roots)), rel=1e-12)
    assert round(np.linalg.det(B)) == 1


def test_toral_fixed_point_and_unstable_direction():
    A = ToralAutomorphism(7)
    np.testing.assert_array_equal(A.apply(np.zeros(A.d)), 0.0)
    u = A.unstable_direction()
    np.testing.assert_allclose(A.matrix @ u, expansion_rate_eta(A) * u, atol=1e-12)


@given(st.lists(st.floats(0, 0.999), min_size=2, max_size=2))
def test_toral_apply_inverse_roundtrip(y):
    A = ToralAutomorphism(5)
    back = A.apply(A.apply(np.array(y)), power=-1)
    d = back - np.array(y)
    np.testing.assert_allclose(d - np.round(d), 0.0, atol=1e-12)


# disk field and X


def test_divergence_free_and_matches_stream_function(rng):
    V = DiskFlowField()
    x = disk_points(rng, 1000, 0.999)
    assert np.max(np.abs(V.div(x))) <= 1e-8
    h = 1e-6
    dH1 = (V.H(x + [h, 0]) - V.H(x - [h, 0])) / (2 * h)
    dH2 = (V.H(x + [0, h]) - V.H(x - [0, h])) / (2 * h)
    np.testing.assert_allclose(V.V(x), np.column_stack([dH2, -dH1]), atol=1e-8)


def test_dv_matches_finite_differences(rng):
    V = DiskFlowField()
    x = disk_points(rng, 50, 0.95)
    h = 1e-6
    J = np.stack([(V.V(x + e) - V.V(x - e)) / (2 * h) for e in (np.array([h, 0]), np.array([0, h]))], axis=2)
    np.testing.assert_allclose(V.DV(x), J, atol=1e-6)


def test_field_rest_disk_and_boundary(rng):
    A = ToralAutomorphism(5)
    X = field_X(DiskFlowField(), bump_alpha(), A.d)
    inner = np.column_stack([disk_points(rng, 100, 0.3), rng.uniform(0, 1, (100, 3))])
    v = X(inner)
    np.testing.assert_array_equal(v[:, :-1], 0.0)
    np.testing.assert_array_equal(v[:, -1], 1.0)
    th = rng.uniform(0, 2 * np.pi, 50)
    rim = np.column_stack([np.cos(th), np.sin(th), rng.uniform(0, 1, (50, 3))])
    assert np.max(np.abs(X(rim))) <= 1e-15
    assert np.max(np.abs(X.divergence(inner))) == 0.0


def test_log_speed_matches_direct_value(rng):
    V = DiskFlowField()
    x = disk_points(rng, 200, 0.9)
    sp = np.linalg.norm(V.V(x), axis=1)
    ok = sp > 1e-200
    np.testing.assert_allclose(V.log_speed(x)[ok], np.log(sp[ok]), rtol=1e-8, atol=1e-8)


def test_field_x_rejects_incompatible_regions():
    with pytest.raises(ValueError):
        field_X(DiskFlowField(r_rest=0.5, r_on=0.6), bump_alpha(U_inner_radius=0.4), 2)


# integrator


@pytest.fixture(scope="module")
def X5():
    A = ToralAutomorphism(5)
    return A, field_X(DiskFlowField(), bump_alpha(), A.d)


def random_states(rng, n, d, radius=0.99):
    return np.column_stack([disk_points(rng, n, radius), rng.uniform(0, 1, (n, d)), rng.uniform(0, 1, n)])


def test_small_time_generator_consistency(X5, rng):
    A, X = X5
    z = random_states(rng, 20, A.d)
    z[:, -1] = 0.5 * z[:, -1]  # no gluing
    t = 1e-4
    zt, _ = flow_map(X, t, z, A, FlowOptions(h=t))
    np.testing.assert_allclose((zt - z) / t, X(z), atol=1e-3 * np.max(np.abs(X(z))) + 1e-12)


def test_composition_consistency(X5, rng):
    A, X = X5
    z = random_states(rng, 30, A.d)
    opts = FlowOptions(h=1e-2, jacobian=False)
    direct = flow_map(X, 0.8, z, A, opts)[0]
    split = flow_map(X, 0.5, flow_map(X, 0.3, z, A, opts)[0], A, opts)[0]
    np.testing.assert_allclose(split, direct, atol=1e-8)


@pytest.mark.parametrize("h", [2e-2, 1e-2, 5e-3])
def test_volume_contract(X5, rng, h):
    A, X = X5
    _, J = flow_map(X, 1.0, random_states(rng, 500, A.d, 0.999), A, FlowOptions(h=h))
    assert np.max(np.abs(np.linalg.det(J) - 1)) <= 10 * h**4


def test_backward_flow_inverts(X5, rng):
    A, X = X5
    z = random_states(rng, 30, A.d)
    opts = FlowOptions(h=1e-3, jacobian=False)
    back = flow_map(X, -1.0, flow_map(X, 1.0, z, A, opts)[0], A, opts)[0]
    d = back - z
    d[:, 2:-1] -= np.round(d[:, 2:-1])
    assert np.max(np.abs(d)) < 1e-9


def test_step_must_divide_t(X5):
    A, X = X5
    with pytest.raises(ValueError):
        flow_map(X, 1.0, np.zeros((1, 5)), A, FlowOptions(h=0.3))


def test_error_budget_rejects_steps(X5, rng):
    A, X = X5
    with pytest.raises(IntegrationError):
        flow_map(X, 0.1, random_states(rng, 5, A.d, 0.9), A, FlowOptions(h=0.1, error_budget=1e-30))


def test_gluing_and_tube_flow(X5, rng):
    A, X = X5
    z = random_states(rng, 50, A.d, 0.25)
    exact = tube_flow(z, 1.0, A)
    np.testing.assert_allclose(exact[:, -1], z[:, -1])
    np.testing.assert_allclose(exact[:, 2:-1], np.mod(z[:, 2:-1] @ CAT.T, 1.0), atol=1e-14)
    rk, J = flow_map(X, 1.0, z, A)
    np.testing.assert_allclose(rk, exact, atol=1e-12)
    np.testing.assert_allclose(J[:, 2:-1, 2:-1], np.broadcast_to(CAT.astype(float), (50, 2, 2)))
    far = tube_flow(z, 7.5, A)
    np.testing.assert_allclose(tube_flow(far, -7.5, A), z, atol=1e-6)


def test_glue_down():
    A = ToralAutomorphism(5)
    z = np.array([[0.0, 0.0, 0.2, 0.7, -0.25]])
    out, J = glue(z.copy(), np.eye(5)[None].copy(), A)
    np.testing.assert_allclose(out[0, 2:-1], np.mod(A.matrix_inv @ [0.2, 0.7], 1.0))
    assert out[0, -1] == pytest.approx(0.75)
    np.testing.assert_allclose(J[0, 2:-1, 2:-1], A.matrix_inv)


def test_tube_map_system(rng):
    A = ToralAutomorphism(5)
    tm = TubeMap(A)
    z = random_states(rng, 10, A.d, 0.2)
    w, D = tm.step(z)
    back, _ = tm.inverse_step(w)
    np.testing.assert_allclose(back, z, atol=1e-12)
    np.testing.assert_allclose(np.linalg.det(D), 1.0)


# slowed map and simple systems


def test_slowed_map_is_cat_map_away_from_origin(rng):
    smap = SlowedToralMap()
    y = rng.uniform(0.3, 0.7, (100, 2))
    out, D = smap.step(y)
    np.testing.assert_allclose(out, np.mod(y @ CAT.T, 1.0), atol=1e-14)
    np.testing.assert_allclose(D, np.broadcast_to(CAT.astype(float), D.shape))


def test_slowed_map_fixed_point_and_area(rng):
    smap = SlowedToralMap()
    out, D = smap.step(np.zeros((1, 2)))
    np.testing.assert_array_equal(out, 0.0)
    np.testing.assert_allclose(D[0], np.eye(2), atol=1e-15)
    y = np.mod(0.2 * (rng.uniform(-1, 1, (200, 2))), 1.0)
    _, D = smap.step(y)
    assert np.max(np.abs(np.linalg.det(D) - 1)) < 1e-8


def test_slowed_map_is_continuous_at_the_switch_radius():
    smap = SlowedToralMap()
    r = LAMBDA * smap.r0
    th = np.linspace(0, 2 * np.pi, 17)
    ring = np.column_stack([np.cos(th), np.sin(th)])
    a = smap.step(np.mod(r * (1 - 1e-9) * ring, 1.0))[0]
    b = smap.step(np.mod(r * (1 + 1e-9) * ring, 1.0))[0]
    d = a - b
    assert np.max(np.abs(d - np.round(d))) < 1e-6


def test_slowed_field_jacobian_matches_fd(rng):
    smap = SlowedToralMap()
    s = rng.uniform(-0.07, 0.07, (40, 2))
    h = 1e-7
    J = np.stack([(smap.field(s + e) - smap.field(s - e)) / (2 * h) for e in (np.array([h, 0]), np.array([0, h]))], 2)
    np.testing.assert_allclose(smap.field_jacobian(s), J, atol=1e-6)


def test_simple_systems():
    z = np.array([[0.3, 0.4]])
    out, D = IdentityMap(2).step(z)
    np.testing.assert_array_equal(out, z)
    out, _ = CircleRotation(0.75).step(np.array([[0.5]]))
    assert out[0, 0] == pytest.approx(0.25)
    tm = TorusMap(CAT)
    np.testing.assert_allclose(tm.inverse_step(tm.step(z)[0])[0], z)


# C^r distance


def test_cr_distance_identity_and_translation(rng):
    grid = rng.uniform(0, 1, (16, 2))
    assert cr_distance_to_identity(lambda x: x.copy(), 3, grid).value == 0.0
    d = cr_distance_to_identity(lambda x: np.mod(x + [0.01, 0.0], 1.0), 3, grid, periodic=[True, True])
    assert d.per_order[0] == pytest.approx(0.01)
    assert max(d.per_order[1:]) < 1e-9


def test_cr_distance_rejects_bad_input(rng):
    with pytest.raises(ValueError):
        cr_distance_to_identity(lambda x: x, 1, rng.uniform(0, 1, (3, 2)))
    with pytest.raises(ValueError):
        cr_distance_to_identity(lambda x: x, 4, rng.uniform(0, 1, (16, 2)))


def test_cr_distance_of_short_flow(X5, rng):
    A, X = X5
    grid = random_states(rng, 16, A.d, 0.9)
    grid[:, -1] = 0.2 + 0.5 * grid[:, -1]
    t = 1e-2

    def fmap(x):
        return flow_map(X, t, x, A, FlowOptions(h=t, jacobian=False))[0]

    d0 = cr_distance_to_identity(fmap, 0, grid).per_order[0]
    assert d0 == pytest.approx(t * np.max(np.abs(X(grid))), rel=0.05)


def test_rim_decay_proxy():
    from dynlab.dynamics.disk import rim_decay

    rep = rim_decay(DiskFlowField(), bump_alpha())
    assert rep["monotone"] and rep["residual"] < -1e6
    # the ratio at one circle matches a direct evaluation where nothing underflows
    V, a = DiskFlowField(), bump_alpha()
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    x = 0.75 * np.column_stack([np.cos(th), np.sin(th)])
    direct = np.log(np.max(np.linalg.norm(V.V(x), axis=1) / a(x)))
    assert rep["max_log_ratio"][0] == pytest.approx(direct, rel=1e-10)
