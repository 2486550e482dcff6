import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from spectone import ambient, fields
from spectone.ambient import christoffel_from_metric
from spectone.errors import AdmissibilityError, ChartDomainError, UnsupportedError

coord = st.floats(-0.6, 0.6)


def builtins():
    return [
        ambient.euclidean(3),
        ambient.hyperbolic_ball(3),
        ambient.hyperbolic_ball(2, -4.0),
        ambient.spherical_cap(3, 2.0),
        ambient.product(ambient.euclidean(2), ambient.euclidean(1)),
        ambient.product(ambient.hyperbolic_ball(2), ambient.euclidean(1)),
    ]


# -- covariant derivative ----------------------------------------------------------------

def test_position_field_has_identity_derivative_in_flat_space():
    E = ambient.euclidean(2)
    X = fields.position_field(E)
    for p in ([0.0, 0.0], [3.0, -1.0]):
        assert np.allclose(ambient.covariant_derivative(E, X, p, [1.0, 0.0]), [1.0, 0.0])


def test_constant_field_is_parallel_in_flat_space():
    E = ambient.euclidean(2)
    const = fields.AmbientField(E, lambda p: np.broadcast_to([1.0, 0.0], p.shape).copy(), "custom")
    assert np.allclose(ambient.covariant_derivative(E, const, [0.3, 2.0], [0.2, -1.0]), 0.0, atol=1e-9)


def test_hyperbolic_covariant_derivative_matches_finite_difference_oracle():
    H = ambient.hyperbolic_ball(2)
    X = fields.position_field(H)
    p, v = np.array([0.5, 0.0]), np.array([0.0, 1.0])
    got = ambient.covariant_derivative(H, X, p, v)
    # oracle: directional difference of the closed-form field plus the Christoffel term
    # of lam^2 |dx|^2 written out by hand
    h = 1e-6
    dX = (X.value(p + h * v) - X.value(p - h * v)) / (2 * h)
    x = X.value(p)
    grad_log = 2.0 * p / (1.0 - p @ p)
    gam = (v @ grad_log) * x + (x @ grad_log) * v - (v @ x) * grad_log
    assert np.allclose(got, dX + gam, atol=1e-7)
    # and the known value: nabla_v (r d/dr) = r coth r v for tangential unit-ish v
    r = 2 * math.atanh(0.5)
    lam = 2.0 / (1 - 0.25)
    assert np.allclose(got, r / math.tanh(r) * v, atol=1e-8)
    assert lam > 0


def test_covariant_derivative_outside_chart_raises():
    H = ambient.hyperbolic_ball(2)
    with pytest.raises(ChartDomainError):
        ambient.covariant_derivative(H, fields.position_field(H), [1.2, 0.0], [1.0, 0.0])


# -- distances ---------------------------------------------------------------------------

def test_euclidean_distance_is_the_norm():
    assert ambient.distance_from_point(ambient.euclidean(2), [0, 0], [3, 4]) == pytest.approx(5.0)


def test_hyperbolic_distance_matches_geodesic_shooting():
    H = ambient.hyperbolic_ball(2)
    d = ambient.distance_from_point(H, [0, 0], [0.5, 0.0])
    assert d == pytest.approx(2 * math.atanh(0.5), abs=1e-14)
    assert d == pytest.approx(oracles.poincare_geodesic_time_to_chart_radius(0.5), abs=1e-8)


def test_product_distance_to_slice_is_first_factor_distance():
    P = ambient.product(ambient.euclidean(2), ambient.euclidean(1))
    p = np.array([3.0, 4.0, 7.0])
    assert ambient.distance_to_totally_convex(P, [0, 0], p) == pytest.approx(5.0)
    assert ambient.half_rho_squared(P, [0, 0], p) == pytest.approx(12.5)
    assert ambient.distance_to_totally_convex(P, [0, 0], [0.0, 0.0, -2.5]) == 0.0


@given(coord, coord, st.floats(-3, 3))
def test_hyperbolic_product_slice_distance_cross_check(x, y, z):
    P = ambient.product(ambient.hyperbolic_ball(2), ambient.euclidean(1))
    p = np.array([x, y, z])
    assert ambient.distance_to_totally_convex(P, [0, 0], p) == pytest.approx(
        ambient.distance_from_point(P.first, [0, 0], p[:2]), abs=1e-12)


def test_custom_space_without_distance_is_unsupported():
    C = ambient.custom(2, lambda p: np.broadcast_to(np.eye(2), p.shape + (2,)).copy())
    with pytest.raises(UnsupportedError):
        ambient.distance_from_point(C, [0, 0], [1, 1])


def test_slice_distance_needs_a_product():
    with pytest.raises(UnsupportedError):
        ambient.distance_to_totally_convex(ambient.euclidean(3), [0, 0], [1, 2, 3])


# -- invariants --------------------------------------------------------------------------

@pytest.mark.parametrize("space", builtins(), ids=lambda s: s.name)
def test_metric_is_symmetric_positive_definite(space):
    pts = ambient.GeodesicBallSpec(np.zeros(space.dim), 0.5, space).sample(256)
    g = space.metric(pts)
    assert np.allclose(g, np.swapaxes(g, -1, -2))
    assert np.all(np.linalg.eigvalsh(g) > 0)


@pytest.mark.parametrize("space", builtins(), ids=lambda s: s.name)
def test_christoffels_match_finite_differences_of_the_metric(space):
    pts = ambient.GeodesicBallSpec(np.zeros(space.dim), 0.5, space).sample(64)
    exact = space.christoffel(pts)
    fd = christoffel_from_metric(space.metric, pts, 1e-5)
    assert np.max(np.abs(exact - fd)) < 1e-7
    assert np.allclose(exact, np.swapaxes(exact, -1, -2))


def test_product_metric_and_connection_have_no_cross_blocks():
    P = ambient.product(ambient.hyperbolic_ball(2), ambient.euclidean(2))
    pts = ambient.GeodesicBallSpec(np.zeros(4), 0.5, P).sample(64)
    g = P.metric(pts)
    gam = P.christoffel(pts)
    assert np.all(g[:, :2, 2:] == 0)
    mixed = np.zeros((4, 4, 4), dtype=bool)
    a, b = slice(0, 2), slice(2, 4)
    for k, i, j in [(a, a, b), (a, b, a), (a, b, b), (b, a, a), (b, a, b), (b, b, a)]:
        mixed[k, i, j] = True
    assert np.all(gam[:, mixed] == 0)


@pytest.mark.parametrize("space", [s for s in builtins() if not isinstance(s, ambient.ProductSpace)],
                         ids=lambda s: s.name)
def test_distance_gradient_has_unit_length(space):
    pts = ambient.GeodesicBallSpec(np.zeros(space.dim), 0.5, space).sample(256)
    pts = pts[np.linalg.norm(pts, axis=-1) > 1e-3]
    grad = ambient.distance_gradient(space, np.zeros(space.dim), pts)
    assert np.allclose(space.norm(pts, grad), 1.0, atol=1e-6)


def test_distance_gradient_away_from_origin_base():
    H = ambient.hyperbolic_ball(2)
    base = np.array([0.2, -0.1])
    pts = ambient.GeodesicBallSpec(np.zeros(2), 0.8, H).sample(64)
    grad = ambient.distance_gradient(H, base, pts)
    assert np.allclose(H.norm(pts, grad), 1.0, atol=1e-6)


@pytest.mark.parametrize("space,K", [
    (ambient.euclidean(3), 0.0),
    (ambient.hyperbolic_ball(3), -1.0),
    (ambient.hyperbolic_ball(2, -4.0), -4.0),
    (ambient.spherical_cap(3, 2.0), 2.0),
])
def test_curvature_bounds_match_sectional_curvature(space, K):
    assert tuple(space.curvature_bounds) == (K, K)
    assert space.kappa_plus == max(K, 0.0) and space.kappa_minus == min(K, 0.0)
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = rng.uniform(-0.3, 0.3, space.dim)
        u, v = rng.normal(size=space.dim), rng.normal(size=space.dim)
        assert ambient.sectional_curvature(space, p, u, v) == pytest.approx(K, abs=1e-5)


def test_geodesic_ball_admissibility_on_caps():
    S = ambient.spherical_cap(3, 1.0)
    ambient.GeodesicBallSpec(np.zeros(3), 1.5, S)
    with pytest.raises(AdmissibilityError):
        ambient.GeodesicBallSpec(np.zeros(3), math.pi / 2, S)
    with pytest.raises(ValueError):
        ambient.GeodesicBallSpec(np.zeros(3), 0.0, ambient.euclidean(3))


def test_geodesic_ball_samples_are_deterministic_and_inside():
    H = ambient.hyperbolic_ball(3)
    ball = ambient.GeodesicBallSpec(np.zeros(3), 1.0, H)
    a, b = ball.sample(500, seed=7), ball.sample(500, seed=7)
    assert np.array_equal(a, b)
    assert np.all(H.distance(np.zeros(3), a) < 1.0)


def test_custom_grid_space_interpolates_the_metric():
    axes = [np.linspace(-1, 1, 5), np.linspace(-1, 1, 5)]
    vals = np.broadcast_to(2.0 * np.eye(2), (5, 5, 2, 2))
    C = ambient.custom_from_grid(axes, vals)
    assert np.allclose(C.metric(np.array([0.3, -0.2])), 2 * np.eye(2))
    assert np.allclose(C.christoffel(np.array([0.3, -0.2])), 0.0, atol=1e-8)
    assert not C.contains(np.array([1.5, 0.0]))
