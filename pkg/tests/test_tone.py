import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectone import ambient, fields, immersion, mesh, spectrum, tone
from spectone.errors import DomainViolationError, ParameterError, SweepError

E3 = ambient.euclidean(3)
H3 = ambient.hyperbolic_ball(3)


def unit_interval():
    return immersion.affine_patch(ambient.euclidean(1), [0.0], [[1.0]], [0.0], [1.0])


def catenoid_strip():
    return immersion.catenoid(v_range=(0.5, 1.5))


def sup_xtop(imm, X):
    return immersion.estimate_supremum(imm, lambda q: immersion.xtop_norm(imm, X, q)).value


# -- the functional c(X) -----------------------------------------------------------------

def test_zero_field_gives_zero():
    imm = immersion.catenoid()
    m = mesh.box_mesh(imm.lo, imm.hi, (12, 6), (True, False))
    assert tone.c_of_field(imm, tone.zero_field(2), m) == 0.0


def test_cotangent_field_on_interval_gives_pi_squared():
    imm = unit_interval()
    vec = lambda q: -math.pi / np.tan(math.pi * q)  # noqa: E731
    m = mesh.interval_mesh(0.0, 1.0, 50)
    pts = mesh.induced_quadrature(imm, m).points.reshape(-1, 1)
    exact = tone.custom_field(vec, lambda q: (math.pi / np.sin(math.pi * q[..., 0])) ** 2)
    assert np.allclose(tone.c_values(imm, exact, pts), math.pi**2, rtol=1e-9)
    assert tone.c_of_field(imm, exact, m) == pytest.approx(math.pi**2, rel=1e-9)
    # differenced divergence: second-order accurate away from the blow-up at the ends
    inner = pts[(pts[:, 0] > 0.1) & (pts[:, 0] < 0.9)]
    assert np.allclose(tone.c_values(imm, tone.custom_field(vec), inner), math.pi**2, rtol=2e-5)


def test_c_of_field_accepts_domains_meshes_and_points():
    imm = immersion.catenoid()
    spec = fields.half_r_squared(E3)
    R = float(spec.value(imm.point(np.array([0.0, 1.0]))))
    X = tone.thm3_field(imm, spec, R)
    dom = tone.exhaustion_domain(imm, tone.h_composed_defining(imm, spec, R), 0.2, 32, 4)
    a = tone.c_of_field(imm, X, dom)
    b = tone.c_of_field(imm, X, dom.mesh)
    c = tone.c_of_field(imm, X, mesh.induced_quadrature(imm, dom.mesh).points)
    assert a == b == c


def test_coordinate_divergence_matches_frame_formula():
    X = fields.position_field(E3)
    for imm in (immersion.catenoid(), immersion.sphere(1.3), catenoid_strip()):
        q = imm.sample(64)
        coord = tone.coordinate_divergence(imm, lambda x: immersion.tangent_components(imm, X, x), q)
        assert np.allclose(coord, immersion.divergence_tangential(imm, X, q), atol=1e-6)
    imm = immersion.plane(H3, (-0.5, -0.5), (0.5, 0.5), offset=0.2)
    Xh = fields.position_field(H3)
    q = imm.sample(64)
    coord = tone.coordinate_divergence(imm, lambda x: immersion.tangent_components(imm, Xh, x), q)
    assert np.allclose(coord, immersion.divergence_tangential(imm, Xh, q), atol=1e-6)


@pytest.mark.parametrize("case", ["catenoid", "hyperbolic_plane"])
def test_tangential_norm_growth_matches_frame_formula(case):
    if case == "catenoid":
        imm, space = catenoid_strip(), E3
    else:
        imm, space = immersion.plane(H3, (-0.5, -0.5), (0.5, 0.5), offset=0.2), H3
    X = fields.position_field(space)
    q = imm.sample(64)
    geo = immersion.point_geometry(imm, X, q)
    p = imm.point(q)
    t = space.norm(p, geo.X_top)
    lie = fields.lie_derivative_matrix(space, X, p)
    lxx = np.einsum("...k,...kl,...l->...", geo.X_top, lie, geo.X_top)
    comps = np.einsum("...k,...kl,...il->...i", geo.X_top, space.metric(p), geo.frame.tangent)
    nb = np.einsum("...ck,...kl,...l->...c", geo.frame.normal, space.metric(p), geo.X_bot)
    pairing = np.einsum("...i,...j,...ijc,...c->...", comps, comps, geo.B, nb)
    want = (lxx + 2.0 * pairing) / (2.0 * t)
    assert np.allclose(immersion.xtop_norm_pairing(imm, X, q), want, rtol=1e-6, atol=1e-8)


# -- prop3 field --------------------------------------------------------------------------------

def test_prop3_field_vanishes_where_tangential_part_does():
    imm = immersion.catenoid()
    X = fields.position_field(E3)
    P = tone.prop3_field(imm, X, sup_xtop(imm, X), 1.0, 0.5)
    waist = np.array([[0.3, 0.0], [2.0, 0.0]])
    assert np.allclose(P.vector(waist), 0.0, atol=1e-12)


def test_prop3_pointwise_bound_on_catenoid_strip():
    imm = catenoid_strip()
    X = fields.position_field(E3)
    rep = immersion.check_condition6(imm, X, n_samples=1024)
    alpha, a_prime = 1.0, rep.alpha_prime_est * 1.01
    P = tone.prop3_field(imm, X, sup_xtop(imm, X), alpha, a_prime, delta=1e-4)
    assert P.params["C"] == pytest.approx(2.0 * (alpha - a_prime))
    q = imm.sample(512)
    c = tone.c_values(imm, P, q)
    lower = P.params["lower_bound"](q)
    margin = c - lower
    assert np.all(margin >= -1e-6 * np.abs(lower))


def test_prop3_band_chain():
    imm = catenoid_strip()
    X = fields.position_field(E3)
    a_prime = immersion.check_condition6(imm, X, n_samples=1024).alpha_prime_est * 1.01
    P = tone.prop3_field(imm, X, sup_xtop(imm, X), 1.0, a_prime, delta=1e-4)
    d = tone.norm_xtop_defining(imm, X, P.params["R_used"])
    for eps in (0.4, 0.2, 0.1):
        dom = tone.exhaustion_domain(imm, d, eps, 48, 8)
        bound = P.params["C"] * imm.m * 1.0 / eps**2
        assert tone.c_of_field(imm, P, dom) >= bound * (1 - 1e-6)


def test_prop3_parameter_errors():
    imm = immersion.catenoid()
    X = fields.position_field(E3)
    R = sup_xtop(imm, X)
    with pytest.raises(ParameterError):
        tone.prop3_field(imm, X, R, 1.0, 1.0)
    with pytest.raises(ParameterError):
        tone.prop3_field(imm, X, 0.5 * R, 1.0, 0.5)


def test_prop3_field_outside_its_domain():
    imm = immersion.catenoid()
    X = fields.position_field(E3)
    P = tone.prop3_field(imm, X, sup_xtop(imm, X), 1.0, 0.5, delta=1e-3)
    far = immersion.catenoid(v_range=(-2.0, 2.0))
    with pytest.raises(DomainViolationError):
        tone.c_values(far, P, np.array([[0.0, 1.9]]))


# -- thm3 field -------------------------------------------------------------------------------

def test_thm3_value_on_catenoid():
    imm = immersion.catenoid()
    spec = fields.half_r_squared(E3)
    R = 2.0
    X = tone.thm3_field(imm, spec, R)
    q = imm.sample(256)
    u = spec.value(imm.point(q))
    assert np.allclose(tone.c_values(imm, X, q), 2.0 / (R - u), rtol=1e-9)
    # the closed form agrees with differencing the field itself
    fd = tone.custom_field(X.vector)
    assert np.allclose(tone.c_values(imm, fd, q[:32]), 2.0 / (R - u[:32]), rtol=1e-4)


def test_thm3_band_chain_on_catenoid():
    imm = immersion.catenoid()
    spec = fields.half_r_squared(E3)
    R = float(spec.value(imm.point(np.array([0.0, 1.0]))))
    X = tone.thm3_field(imm, spec, R)
    d = tone.h_composed_defining(imm, spec, R)
    for eps in (0.4, 0.2, 0.1):
        assert tone.c_of_field(imm, X, tone.exhaustion_domain(imm, d, eps, 48, 8)) >= 2.0 / eps - 1e-9


def test_thm3_with_constant_h_is_zero():
    imm = immersion.sphere(1.0)
    spec = fields.half_r_squared(E3)
    X = tone.thm3_field(imm, spec, 1.0)
    q = imm.sample(32)
    assert np.allclose(X.vector(q), 0.0, atol=1e-12)
    # Delta(h o F) = 0 on the sphere about its centre
    assert np.allclose(tone.c_values(imm, X, q), 0.0, atol=1e-9)


def test_thm3_parameter_and_domain_errors():
    imm = immersion.catenoid()
    spec = fields.half_r_squared(E3)
    with pytest.raises(ParameterError):
        tone.thm3_field(imm, spec, 0.5)
    X = tone.thm3_field(imm, spec, 2.0)
    far = immersion.catenoid(v_range=(-3.0, 3.0))
    with pytest.raises(DomainViolationError):
        tone.c_values(far, X, np.array([[0.0, 2.5]]))


def test_barta_bound_holds_on_flat_disk_candidates():
    imm = immersion.restrict(immersion.plane(), immersion.disk_region(1.0))
    spec = fields.half_r_squared(E3)
    m, mc = mesh.disk_mesh(0.95, 24), mesh.disk_mesh(0.95, 12)
    res = spectrum.dirichlet_eigenvalue(imm, m, mc)
    tol = 10 * res.refinement_estimate
    for R in (0.5, 1.0, 3.0):
        X = tone.thm3_field(imm, spec, R)
        assert res.lambda1 >= tone.c_of_field(imm, X, m) - tol


# -- Cheeger sweeps ---------------------------------------------------------------------------

def test_flat_disk_radial_sweep():
    imm = immersion.plane(lo=(-1.0, -1.0), hi=(1.0, 1.0))
    m = mesh.disk_mesh(1.0, 32)
    sw = tone.cheeger_sweep(imm, m, lambda q: np.linalg.norm(q, axis=-1))
    assert sw.upper_bound == pytest.approx(2.0, rel=5e-3)
    assert sw.threshold == pytest.approx(1.0, abs=1e-2)


def test_unit_interval_sweep_from_one_end():
    imm = unit_interval()
    sw = tone.cheeger_sweep(imm, mesh.interval_mesh(0, 1, 64), lambda q: q[:, 0])
    assert sw.upper_bound == pytest.approx(1.0, rel=1e-6)
    # away from the end the ratio is 1/t
    i = len(sw.thresholds) // 2
    assert sw.ratios[i] == pytest.approx(1.0 / sw.thresholds[i], rel=1e-9)


def test_hyperbolic_disk_sweep_sits_above_isoperimetric_bound():
    H2 = ambient.hyperbolic_ball(2)
    s = math.tanh(0.5)
    imm = immersion.identity_patch(H2, [-s, -s], [s, s])
    m = mesh.disk_mesh(s, 32)
    sw = tone.cheeger_sweep(imm, m, lambda q: np.linalg.norm(q, axis=-1))
    assert sw.upper_bound == pytest.approx(math.sinh(1.0) / (math.cosh(1.0) - 1.0), rel=5e-3)
    assert sw.upper_bound >= 2 * 1.0 / 1.0


def test_constant_sweep_is_an_error():
    imm = unit_interval()
    with pytest.raises(SweepError):
        tone.cheeger_sweep(imm, mesh.interval_mesh(0, 1, 8), np.ones(9))


# -- inequality reports -------------------------------------------------------------------------

@given(st.floats(-1e3, 1e3), st.floats(0, 1e3))
def test_verdict_never_claims_violation_inside_uncertainty(margin, unc):
    v = tone.verdict(margin, unc)
    if abs(margin) <= unc:
        assert v == tone.INCONCLUSIVE
    else:
        assert v == (tone.HOLDS if margin > 0 else tone.VIOLATED)


def test_report_with_missing_estimates_is_incomplete():
    rep = tone.inequality_report(2, 1.0, sup_xf=1.0, sup_xtop=1.0)
    assert set(rep.incomplete) == {"isoperimetric", "general_tone"}
    assert rep.checks == []
    assert rep.as_dict()["incomplete"] == rep.incomplete


def test_report_flags_vanishing_tangential_part():
    rep = tone.inequality_report(2, 1.0, sup_xf=2.0, sup_xtop=0.0, lambda_fem=3.0)
    assert "X_top vanishes on the sampled region" in rep.flags


def test_report_catenoid_minimal_checks():
    rep = tone.inequality_report(2, 1.0, sup_xf=2.0, sup_xtop=1.5, sup_h=0.0, cheeger_upper=1.6,
                                 lambda_fem=4.0, minimal=True, c_inf=3.0)
    names = {c.name for c in rep.checks}
    assert names == {"isoperimetric", "general_tone", "minimal_isoperimetric", "minimal_tone",
                     "cheeger_lower", "cheeger_tone_lower", "barta"}
    c = rep.check("minimal_tone")
    assert c.lhs == pytest.approx(1 / 1.5) and c.rhs == pytest.approx(2.0 / 2.0 * 2.0)
    assert c.verdict == tone.HOLDS
    assert rep.cheeger_paper_lower == pytest.approx(2.0 / 1.5)
    with pytest.raises(KeyError):
        rep.check("nope")


def test_report_sphere_uses_mean_curvature():
    rho0 = 2.0
    rep = tone.inequality_report(2, 1.0, sup_xf=rho0, sup_xtop=0.0, sup_h=1.0 / rho0, cheeger_upper=0.0)
    c = rep.check("isoperimetric")
    assert c.lhs == pytest.approx(1.0 / rho0) and c.rhs == pytest.approx(1.0 / rho0)
    assert c.verdict == tone.INCONCLUSIVE


def test_overlapping_uncertainty_is_inconclusive():
    # true margin slightly negative, but the estimators are too loose to tell
    rep = tone.inequality_report(2, 1.0, sup_xf=1.0, lambda_fem=0.98, uncertainty={"lambda_fem": 0.1})
    assert rep.check("general_tone").margin < 0
    assert rep.check("general_tone").verdict == tone.INCONCLUSIVE
    rep = tone.inequality_report(2, 1.0, sup_xf=1.0, lambda_fem=0.5)
    assert rep.check("general_tone").verdict == tone.VIOLATED


def test_product_check():
    rep = tone.inequality_report(2, 0.8, sup_rho=1.0, cheeger_upper=2.0)
    c = rep.check("prop4_product")
    assert c.rhs == pytest.approx(2.0 / (2 * 0.8)) and c.verdict == tone.HOLDS


# -- regular values ------------------------------------------------------------------------------

def test_regular_eps_drops_critical_levels():
    imm = immersion.catenoid()
    spec = fields.half_r_squared(E3)
    R = float(spec.value(imm.point(np.array([0.0, 1.0]))))
    d = tone.h_composed_defining(imm, spec, R)
    # h o F has its minimum 1/2 on the waist; R - eps = 1/2 is critical
    crit = R - 0.5
    assert tone.regular_eps(imm, d, [0.4, crit, 0.1]) == [0.4, 0.1]
    flat = immersion.plane(lo=(-1.2, -1.2), hi=(1.2, 1.2))
    d = tone.h_composed_defining(flat, spec, 0.5)
    # eps = 0.5 puts the lower level on the centre of the disk
    assert tone.regular_eps(flat, d, [0.5, 0.2], center=[0.0, 0.0]) == [0.2]
