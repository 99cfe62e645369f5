import math

import numpy as np
import pytest

from msflow.errors import BadSpec, ConvexityViolation
from msflow import geometry
from msflow.geometry import (
    COORDINATE_X,
    CONSTANT_ONE,
    RADIUS_SQUARED,
    audit_frenet,
    area_agreement,
    boundary_integral,
    build_angle,
    build_domain,
    circle,
    constant_angle,
    ellipse,
    fourier_angle,
    fourier_support,
    frame_at,
    integrate_over_domain,
    total_turning,
)

THETAS = np.linspace(0.0, 2.0 * np.pi, 17)


def test_circle_exact_geometry():
    c = circle(1.0)
    assert c.perimeter == pytest.approx(2.0 * math.pi, abs=1e-12)
    assert c.area == pytest.approx(math.pi, abs=1e-12)
    assert np.allclose(c.curvature(THETAS), 1.0, atol=1e-14)


def test_circle_frame_values():
    f = frame_at(circle(2.0), 0.0)
    assert np.allclose(f.point, [2.0, 0.0], atol=1e-14)
    assert np.allclose(f.inward_normal, [-1.0, 0.0], atol=1e-14)
    assert np.allclose(f.tangent, [0.0, 1.0], atol=1e-14)
    assert f.curvature == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("curve", [circle(1.0), ellipse(1.5, 1.0),
                                   fourier_support(1.0, [(3, 0.05, 0.02)])])
def test_frame_orthonormal_and_right_handed(curve):
    for th in THETAS:
        f = curve.frame_at(th)
        assert abs(np.dot(f.tangent, f.inward_normal)) < 1e-14
        assert np.linalg.norm(f.tangent) == pytest.approx(1.0, abs=1e-14)
        assert np.linalg.norm(f.inward_normal) == pytest.approx(1.0, abs=1e-14)
        # rotating T by +90 deg gives the inward normal
        rot = np.array([-f.tangent[1], f.tangent[0]])
        assert np.allclose(rot, f.inward_normal, atol=1e-14)
        # the normal points into the domain
        inside = f.point + 1e-3 * f.inward_normal
        assert curve.distance_to_boundary(inside)[0] > 0


def test_ellipse_area_and_curvature_range():
    e = ellipse(1.5, 1.0)
    # closed forms: area = pi a b, curvature in [b/a^2, a/b^2]
    assert e.area == pytest.approx(1.5 * math.pi, abs=1e-10)
    th = np.linspace(0.0, 2.0 * np.pi, 20000, endpoint=False)
    k = e.curvature(th)
    assert k.min() == pytest.approx(1.0 / 1.5 ** 2, abs=1e-6)
    assert k.max() == pytest.approx(1.5, abs=1e-6)
    f = e.frame_at(0.0)
    assert f.curvature == pytest.approx(1.5, abs=1e-12)
    assert np.allclose(f.point, [1.5, 0.0], atol=1e-12)


def test_gamma_prime_equals_rho_tangent():
    e = ellipse(1.5, 1.0)
    th = np.linspace(0.1, 6.0, 23)
    d = 1e-4
    fd = (e.point(th + d) - e.point(th - d)) / (2.0 * d)
    expected = e.radius_of_curvature(th)[:, None] * e.tangent(th)
    assert np.max(np.abs(fd - expected)) < 1e-6


def test_pure_first_harmonic_is_translated_disk():
    # n = 1 terms only translate the body: rho = h0 identically
    c = fourier_support(1.0, [(1, -2.0, 0.0)])
    th = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    assert np.allclose(c.radius_of_curvature(th), 1.0, atol=1e-13)
    assert c.area == pytest.approx(math.pi, abs=1e-10)


def test_convexity_violation():
    # h = 1 + 0.5 cos 2theta gives rho = 1 - 1.5 cos 2theta <= 0 at theta = 0
    with pytest.raises(ConvexityViolation):
        fourier_support(1.0, [(2, 0.5, 0.0)])


@pytest.mark.parametrize("spec", [
    {"shape": "circle", "R": -1.0},
    {"shape": "ellipse", "a": 0.0, "b": 1.0},
    {"shape": "pentagon"},
    {"no_shape": 1},
])
def test_bad_shape_specs(spec):
    with pytest.raises(BadSpec):
        build_domain(spec)


def test_build_domain_from_json_specs():
    assert build_domain({"shape": "circle", "R": 1.0}).kind == "circle"
    assert build_domain({"shape": "ellipse", "a": 1.5, "b": 1.0}).kind == "ellipse"
    c = build_domain({"shape": "support", "h0": 1.0, "fourier": [[3, 0.05, 0.0]]})
    assert c.kind == "fourier"


def test_total_turning_and_area_agreement():
    for curve in (circle(1.0), ellipse(1.5, 1.0)):
        assert abs(total_turning(curve) - 2.0 * math.pi) < 1e-8
        assert area_agreement(curve) < 1e-10


def test_frenet_audit_circle():
    rep = audit_frenet(circle(1.0), samples=256, test=COORDINATE_X)
    assert rep.max_tangent_residual < 1e-10
    assert rep.max_normal_residual < 1e-10
    assert rep.max_commutator_residual < 1e-10


def test_frenet_audit_ellipse():
    rep = audit_frenet(ellipse(1.5, 1.0), samples=256, test=RADIUS_SQUARED)
    assert rep.max_tangent_residual < 1e-8
    assert rep.max_normal_residual < 1e-8
    assert rep.max_commutator_residual < 1e-8


def test_frenet_audit_constant_test_function():
    # derivatives of constants vanish, so the commutator residual is exactly 0
    rep = audit_frenet(ellipse(1.5, 1.0), samples=64, test=CONSTANT_ONE)
    assert rep.max_commutator_residual == 0.0


def test_frenet_audit_rejects_few_samples():
    with pytest.raises(BadSpec):
        audit_frenet(circle(1.0), samples=8)


def test_distance_to_boundary_circle():
    c = circle(1.0)
    d = c.distance_to_boundary([[0.0, 0.0], [0.5, 0.0], [0.99, 0.0]])
    assert d[0] == pytest.approx(1.0, abs=1e-5)
    assert d[1] == pytest.approx(0.5, abs=1e-5)
    assert d[2] == pytest.approx(0.01, abs=1e-5)


def test_arclength_inverse():
    e = ellipse(1.5, 1.0)
    s = np.linspace(0.0, e.perimeter, 37, endpoint=False)
    th = e.theta_at_arclength(s)
    th_fine, table = e._arclength_table
    s_back = np.interp(th, th_fine, table)
    assert np.max(np.abs(s_back - s)) < 1e-6


def test_integrate_over_domain():
    c = circle(1.0)
    one = integrate_over_domain(c, lambda p: np.ones(p.shape[0]))
    assert one == pytest.approx(math.pi, rel=1e-9)
    x2 = integrate_over_domain(c, lambda p: p[:, 0] ** 2)
    assert x2 == pytest.approx(math.pi / 4.0, rel=1e-8)
    e = ellipse(1.5, 1.0)
    assert integrate_over_domain(e, lambda p: np.ones(p.shape[0])) == pytest.approx(
        1.5 * math.pi, rel=1e-8)


def test_boundary_integral_constant():
    c = circle(1.0)
    val = boundary_integral(c, lambda th: np.cos(2.0) * np.ones_like(th))
    assert val == pytest.approx(2.0 * math.pi * math.cos(2.0), abs=1e-12)


def test_angle_profile_constant():
    a = constant_angle(2.0)
    assert np.allclose(a.alpha(THETAS), 2.0)
    assert np.allclose(a.dalpha_dtheta(THETAS), 0.0)
    assert np.allclose(a.cos_alpha(THETAS), math.cos(2.0))


def test_angle_profile_fourier_and_tangential_derivative():
    a = fourier_angle(2.0, [(1, 0.3, 0.0)])
    c = circle(2.0)
    th = np.linspace(0, 2 * np.pi, 11)
    # on a circle of radius 2, D_T alpha = alpha'(theta)/2
    assert np.allclose(a.tangential_derivative(c, th), -0.3 * np.sin(th) / 2.0)


@pytest.mark.parametrize("value", [0.0, math.pi, -0.5, 4.0])
def test_angle_profile_rejects_out_of_range(value):
    with pytest.raises(BadSpec):
        constant_angle(value)


def test_build_angle_specs():
    assert build_angle({"const": 2.0}).kind == "const"
    a = build_angle({"fourier": {"c0": 1.8, "terms": [[1, 0.1, 0.0]]}})
    assert a.kind == "fourier"
    with pytest.raises(BadSpec):
        build_angle({"linear": 1.0})
