import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from spectone import ambient, fields
from spectone.errors import AdmissibilityError, DegenerateFootError, UnsupportedError

COTH1 = 1.0 / math.tanh(1.0)


def _poincare_position_field(p):
    """``r d/dr`` in the unit Poincare ball, written out independently of the package."""
    s = np.linalg.norm(p)
    r = 2.0 * math.atanh(s)
    return r * (1.0 - s * s) / 2.0 * p / s


def _poincare_metric(p):
    lam = 2.0 / (1.0 - float(np.dot(p, p)))
    return lam * lam * np.eye(p.size)


# -- Lie derivative of the metric ---------------------------------------------------------

@pytest.mark.parametrize("p", [[0.0, 0.0], [1.5, -2.0], [10.0, 3.0]])
def test_euclidean_position_field_doubles_the_metric(p):
    E = ambient.euclidean(2)
    X = fields.position_field(E)
    assert fields.lie_derivative_metric(E, X, p, [1.0, 0.0], [1.0, 0.0]) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("space", [ambient.euclidean(2), ambient.spherical_cap(2, 1.0), ambient.hyperbolic_ball(2)],
                         ids=lambda s: s.name)
def test_rotation_is_killing(space):
    X = fields.rotation_field(space)
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = rng.uniform(-0.5, 0.5, 2)
        y, z = rng.normal(size=2), rng.normal(size=2)
        assert fields.lie_derivative_metric(space, X, p, y, z) == pytest.approx(0.0, abs=1e-9)


def test_hyperbolic_position_field_lie_derivative_matches_oracle():
    H = ambient.hyperbolic_ball(2)
    s = oracles.poincare_chart_radius_at_distance(1.0)
    p = np.array([s, 0.0])
    unit = 1.0 / math.sqrt(_poincare_metric(p)[0, 0])
    radial, tangential = np.array([unit, 0.0]), np.array([0.0, unit])
    ref = oracles.fd_lie_derivative(_poincare_metric, _poincare_position_field, p)
    X = fields.position_field(H)
    got = fields.lie_derivative_matrix(H, X, p)
    assert np.allclose(got, ref, rtol=1e-6, atol=1e-6)
    assert fields.lie_derivative_metric(H, X, p, radial, radial) == pytest.approx(2.0, abs=1e-8)
    assert fields.lie_derivative_metric(H, X, p, tangential, tangential) == pytest.approx(2.0 * COTH1, abs=1e-8)


@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6), st.floats(-2, 2), st.floats(-2, 2))
def test_lie_derivative_is_bilinear_and_symmetric(vals, a, b):
    H = ambient.hyperbolic_ball(2)
    X = fields.position_field(H)
    p = np.array([0.3, -0.2])
    y, z, w = np.reshape(vals, (3, 2))
    L = lambda u, v: fields.lie_derivative_metric(H, X, p, u, v)  # noqa: E731
    assert L(y, z) == pytest.approx(L(z, y), abs=1e-9)
    assert L(a * y + b * w, z) == pytest.approx(a * L(y, z) + b * L(w, z), abs=1e-8)


# -- conformality ----------------------------------------------------------------------

def test_euclidean_position_field_is_exactly_conformal():
    E = ambient.euclidean(3)
    est = fields.estimate_conformality(E, fields.position_field(E), fields.BoxRegion(-np.ones(3), np.ones(3)))
    assert est.alpha_est == pytest.approx(1.0, abs=1e-9)
    assert est.beta_est == pytest.approx(1.0, abs=1e-9)
    assert est.sample_count == 4096


def test_homothety_scales_conformality():
    E = ambient.euclidean(2)
    X = fields.scaled_field(fields.position_field(E), 2.0)
    est = fields.estimate_conformality(E, X, fields.BoxRegion(-np.ones(2), np.ones(2)), 256)
    assert est.alpha_est == pytest.approx(2.0, abs=1e-9)
    assert est.beta_est == pytest.approx(2.0, abs=1e-9)


def test_hyperbolic_ball_conformality_on_unit_geodesic_ball():
    H = ambient.hyperbolic_ball(3)
    est = fields.estimate_conformality(H, fields.position_field(H), ambient.GeodesicBallSpec(np.zeros(3), 1.0, H))
    assert est.alpha_est == pytest.approx(1.0, abs=1e-6)
    assert est.beta_est == pytest.approx(fields.alpha_kappa(1.0, -1.0), abs=5e-3)
    assert est.beta_est <= fields.alpha_kappa(1.0, -1.0) + 1e-9


@pytest.mark.parametrize("space,R", [
    (ambient.hyperbolic_ball(2), 1.0),
    (ambient.hyperbolic_ball(3, -4.0), 0.7),
    (ambient.spherical_cap(2, 1.0), 1.0),
    (ambient.spherical_cap(3, 2.0), 0.8),
    (ambient.euclidean(3), 2.0),
], ids=["H2", "H3(-4)", "S2", "S3(2)", "E3"])
def test_position_field_constants_sit_between_comparison_values(space, R):
    est = fields.estimate_conformality(space, fields.position_field(space),
                                       ambient.GeodesicBallSpec(np.zeros(space.dim), R, space), 1024)
    tol = 1e-6
    assert est.alpha_est >= fields.alpha_kappa(R, space.kappa_plus) - tol
    assert est.beta_est <= fields.alpha_kappa(R, space.kappa_minus) + tol
    assert est.alpha_est <= est.beta_est


def test_conformality_is_deterministic():
    H = ambient.hyperbolic_ball(2)
    ball = ambient.GeodesicBallSpec(np.zeros(2), 1.0, H)
    a = fields.estimate_conformality(H, fields.position_field(H), ball, 128, seed=5)
    b = fields.estimate_conformality(H, fields.position_field(H), ball, 128, seed=5)
    assert a == b


def test_conformality_rejects_empty_sampling():
    E = ambient.euclidean(2)
    with pytest.raises(ValueError):
        fields.estimate_conformality(E, fields.position_field(E), fields.BoxRegion(-np.ones(2), np.ones(2)), 0)


def test_unbounded_marker_orders_above_every_float():
    assert fields.UNBOUNDED > 1e300
    assert fields.UNBOUNDED >= math.inf
    assert not fields.UNBOUNDED < 0.0
    assert fields.Unbounded() is fields.UNBOUNDED
    est = fields.ConformalityEstimate(1.0, fields.UNBOUNDED, 1, "x")
    assert est.as_dict()["beta_est"] == "inf"


# -- alpha_kappa ---------------------------------------------------------------------------

def test_alpha_kappa_examples():
    assert fields.alpha_kappa(7.3, 0.0) == 1.0
    assert fields.alpha_kappa(math.pi / 4, 1.0) == pytest.approx(math.pi / 4, rel=1e-12)
    assert fields.alpha_kappa(1.0, -1.0) == pytest.approx(1.313035, abs=1e-6)
    assert fields.alpha_kappa(1.0, -1.0) == pytest.approx(COTH1, rel=1e-12)


def test_alpha_kappa_admissibility():
    with pytest.raises(AdmissibilityError):
        fields.alpha_kappa(math.pi / 2, 1.0)
    with pytest.raises(ValueError):
        fields.alpha_kappa(-1.0, 0.0)


@given(st.floats(0.01, 3.0))
def test_alpha_kappa_is_nonincreasing_in_kappa(R):
    cap = (math.pi / (2 * R)) ** 2
    grid = [k for k in np.linspace(-4.0, 4.0, 81) if k < cap * 0.999]
    vals = [fields.alpha_kappa(R, k) for k in grid]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


@given(st.floats(-10.0, 10.0))
def test_alpha_kappa_tends_to_one_at_small_radius(kappa):
    assert fields.alpha_kappa(1e-6, kappa) == pytest.approx(1.0, abs=1e-4)


def test_alpha_kappa_is_continuous_at_zero_curvature():
    for k in (1e-9, -1e-9):
        assert fields.alpha_kappa(2.0, k) == pytest.approx(1.0, abs=1e-8)


# -- Hessians ----------------------------------------------------------------------------

@pytest.mark.parametrize("p", [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5]])
def test_euclidean_half_r_squared_hessian_is_identity(p):
    E = ambient.euclidean(3)
    assert np.allclose(fields.hessian_of(E, fields.half_r_squared(E), p), np.eye(3))


def test_product_half_rho_squared_hessian_is_block():
    P = ambient.product(ambient.euclidean(2), ambient.euclidean(1))
    hess = fields.hessian_of(P, fields.half_rho_squared(P), [0.4, -0.7, 2.0])
    assert np.allclose(hess, np.diag([1.0, 1.0, 0.0]))


def test_hyperbolic_half_r_squared_hessian_eigenvalues_at_unit_distance():
    H = ambient.hyperbolic_ball(2)
    s = oracles.poincare_chart_radius_at_distance(1.0)
    p = np.array([s, 0.0])
    spec = fields.half_r_squared(H)
    ev = fields.relative_eigenvalues(fields.hessian_of(H, spec, p), H.metric(p))
    assert ev == pytest.approx([1.0, COTH1], abs=1e-9)


def test_analytic_hessian_agrees_with_finite_differences():
    H = ambient.hyperbolic_ball(3)
    spec = fields.half_r_squared(H)
    fd = fields.ConvexFunctionSpec(H, spec.value_fn)
    p = np.array([0.2, -0.3, 0.1])
    assert np.allclose(spec.hessian(p), fd.hessian(p), atol=1e-5)
    assert np.allclose(spec.differential(p), fd.differential(p), atol=1e-7)


@pytest.mark.parametrize("space", [ambient.euclidean(3), ambient.hyperbolic_ball(3), ambient.spherical_cap(3, 1.0),
                                   ambient.product(ambient.hyperbolic_ball(2), ambient.euclidean(1))],
                         ids=lambda s: s.name)
def test_gradient_field_lie_derivative_is_twice_the_hessian(space):
    spec = fields.half_r_squared(space)
    X = fields.gradient_field(spec)
    rng = np.random.default_rng(11)
    for _ in range(8):
        p = rng.uniform(-0.4, 0.4, space.dim)
        y = rng.normal(size=space.dim)
        lhs = fields.lie_derivative_metric(space, X, p, y, y)
        rhs = 2.0 * y @ fields.hessian_of(space, spec, p) @ y
        assert lhs == pytest.approx(rhs, rel=1e-5, abs=1e-6)


def test_gradient_field_matches_position_field():
    H = ambient.hyperbolic_ball(2)
    p = np.array([0.25, 0.4])
    assert np.allclose(fields.gradient_field(fields.half_r_squared(H)).value(p),
                       fields.position_field(H).value(p), atol=1e-12)


def test_analytic_position_field_needs_origin_base():
    with pytest.raises(UnsupportedError):
        fields.position_field(ambient.hyperbolic_ball(2), [0.1, 0.0])


# -- Hessian comparison on products ----------------------------------------------------------

def test_kasue_bound_radial_direction_is_tight():
    P = ambient.product(ambient.euclidean(2), ambient.euclidean(1))
    p = np.array([0.6, -0.8, 1.3])
    y = np.array([0.6, -0.8, 0.0])
    bound = fields.kasue_lower_bound(P, [0.0, 0.0], p, y)
    assert bound == pytest.approx(1.0, abs=1e-12)
    assert y @ fields.hessian_of(P, fields.half_rho_squared(P), p) @ y == pytest.approx(1.0, abs=1e-12)


def test_kasue_bound_vanishes_along_slice_factor():
    P = ambient.product(ambient.euclidean(2), ambient.euclidean(1))
    p = np.array([0.6, -0.8, 1.3])
    y = np.array([0.0, 0.0, 1.0])
    assert fields.kasue_lower_bound(P, [0.0, 0.0], p, y) == pytest.approx(0.0, abs=1e-12)
    assert y @ fields.hessian_of(P, fields.half_rho_squared(P), p) @ y >= 0.0


@pytest.mark.parametrize("space", [ambient.product(ambient.hyperbolic_ball(2), ambient.euclidean(1)),
                                   ambient.product(ambient.euclidean(2), ambient.euclidean(2))],
                         ids=lambda s: s.name)
def test_kasue_inequality_at_samples(space):
    spec = fields.half_rho_squared(space)
    x0 = np.zeros(space.split_index)
    rng = np.random.default_rng(17)
    for _ in range(64):
        p = rng.uniform(-0.7, 0.7, space.dim)
        y = rng.normal(size=space.dim)
        bound = fields.kasue_lower_bound(space, x0, p, y)
        assert y @ fields.hessian_of(space, spec, p) @ y >= bound - 1e-9


def test_kasue_bound_rejects_points_on_slice_and_positive_curvature():
    P = ambient.product(ambient.euclidean(2), ambient.euclidean(1))
    with pytest.raises(DegenerateFootError):
        fields.kasue_lower_bound(P, [0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0])
    S = ambient.product(ambient.spherical_cap(2, 1.0), ambient.euclidean(1))
    with pytest.raises(UnsupportedError):
        fields.kasue_lower_bound(S, [0.0, 0.0], [0.3, 0.0, 1.0], [1.0, 0.0, 0.0])
