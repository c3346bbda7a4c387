import numpy as np
import pytest

from trijunction import ParamCurve, GeometryError, ProjectionError
from trijunction.curves import divergence_formula_check, tangential_divergence, \
    tangential_gradient


def test_segment_frame():
    seg = ParamCurve.line((0, 0), (1, 0))
    s = np.linspace(0, 1, 7)
    assert np.allclose(seg.tangent(s), [1, 0])
    assert np.allclose(seg.normal(s), [0, 1])
    assert np.allclose(seg.curvature(s), 0.0)
    assert abs(seg.length - 1.0) < 1e-12


def test_circle_frame_and_sign():
    # counterclockwise parametrization: nu = rot90(tau) points inward, H < 0
    c = ParamCurve.circle(radius=2.0, n=2000)
    assert np.allclose(c.normal(0.0), [-1, 0], atol=1e-9)
    s = np.linspace(0, 1, 50, endpoint=False)
    assert np.max(np.abs(c.curvature(s) + 0.5)) < 5e-7
    # clockwise: outward normal, H = +1/R
    cw = ParamCurve.circle(radius=2.0, n=2000, clockwise=True)
    assert np.max(np.abs(cw.curvature(s) - 0.5)) < 5e-7


def test_quarter_arc_normals_radial():
    a = ParamCurve.arc((0, 0), 1.0, 0.0, np.pi / 2, n=1200)
    s = np.linspace(0, 1, 5)
    pts = a.point(s)
    radial = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    align = np.abs(np.sum(a.normal(s) * radial, axis=1))
    assert np.max(np.abs(align - 1.0)) < 1e-10


def test_parabola_curvature():
    x = np.linspace(-0.6, 0.6, 1500)
    par = ParamCurve(np.stack([x, x ** 2], axis=1),
                     end_tangents=((1, -1.2), (1, 1.2)))
    assert abs(abs(par.curvature(0.5)) - 2.0) < 2e-5


def test_degenerate_rejected():
    with pytest.raises(GeometryError):
        ParamCurve(np.zeros((6, 2)))


def test_signed_distance():
    cw = ParamCurve.circle(radius=1.0, n=2000, clockwise=True)
    th = 0.7
    assert abs(cw.signed_distance(np.array([1.3 * np.cos(th), 1.3 * np.sin(th)]))
               - 0.3) < 1e-8
    # on-curve point
    p = cw.point(0.37)
    assert abs(cw.signed_distance(p)) < 1e-10
    # definition: x = gamma(s) + t nu
    seg = ParamCurve.line((0, 0), (1, 0), n=8)
    x = seg.point(0.4) + 0.01 * seg.normal(0.4)
    assert abs(seg.signed_distance(x) - 0.01) < 1e-8
    with pytest.raises(ProjectionError):
        cw.signed_distance(np.array([3.0, 0.0]))


def test_normal_extension_matches_distance_gradient():
    a = ParamCurve.arc((0.2, -0.1), 0.8, 0.3, 1.9, n=1200)
    x = a.point(0.5) + 0.05 * a.normal(0.5)
    h = 1e-5
    g = np.array([
        (a.project(x + [h, 0])[1][0] - a.project(x - [h, 0])[1][0]) / (2 * h),
        (a.project(x + [0, h])[1][0] - a.project(x - [0, h])[1][0]) / (2 * h)])
    assert np.linalg.norm(g - a.normal_extension(x[None, :])[0]) < 1e-6


def test_tangential_calculus():
    a = ParamCurve.arc((0, 0), 1.0, 0.1, 1.2, n=1200)
    s = np.linspace(0.1, 0.9, 9)
    # constant scalar field: zero tangential gradient
    g = tangential_gradient(a, s, lambda P: np.zeros((P.shape[0], 2)))
    assert np.max(np.abs(g)) < 1e-14
    # identity vector field: div_G x = 1
    div = tangential_divergence(a, s, lambda P: P,
                                jac=lambda P: np.tile(np.eye(2), (len(P), 1, 1)))
    assert np.max(np.abs(div - 1.0)) < 1e-12
    # g = nu on a straight segment: div_G nu = 0
    seg = ParamCurve.line((0, 0), (2, 1), n=8)
    div = tangential_divergence(seg, s, lambda P: seg.normal(seg.project(P)[0]))
    assert np.max(np.abs(div)) < 1e-8


def test_divergence_formula():
    a = ParamCurve.arc((0, 0), 1.0, 0.0, np.pi / 2, n=1200)
    jac_id = lambda P: np.tile(np.eye(2), (len(P), 1, 1))
    lhs, rhs = divergence_formula_check(a, lambda P: P, jac_id, panels=512)
    assert abs(lhs - rhs) < 1e-8
    # g = tau: both sides reduce to the endpoint telescoping
    gt = lambda P: a.tangent(a.project(P)[0])
    lhs, rhs = divergence_formula_check(a, gt, panels=512)
    assert abs(lhs - rhs) < 1e-6
    # g = nu on a straight segment: both sides vanish
    seg = ParamCurve.line((0, 0), (1, 0), n=8)
    gn = lambda P: seg.normal(seg.project(P)[0])
    lhs, rhs = divergence_formula_check(seg, gn)
    assert abs(lhs) < 1e-8 and abs(rhs) < 1e-8


def test_divergence_formula_randomized(rng):
    for _ in range(6):
        c = rng.uniform(-0.3, 0.3, 2)
        r = rng.uniform(0.5, 1.5)
        t0, t1 = np.sort(rng.uniform(0, 2 * np.pi, 2))
        if t1 - t0 < 0.5:
            t1 = t0 + 0.5
        arc = ParamCurve.arc(c, r, t0, t1, n=1000)
        A = rng.uniform(-1, 1, (2, 2))
        b = rng.uniform(-1, 1, 2)
        fld = lambda P: P @ A.T + b
        jac = lambda P: np.tile(A, (len(P), 1, 1))
        lhs, rhs = divergence_formula_check(arc, fld, jac, panels=512)
        assert abs(lhs - rhs) < 1e-6


def test_curvature_equals_tangential_divergence_of_normal(rng):
    """H = div_G nu with nu extended by closest-point projection."""
    x = np.linspace(-0.5, 0.5, 1200)
    curve = ParamCurve(np.stack([x, 0.3 * np.sin(2 * x) + 0.1 * x ** 2], axis=1))
    s = rng.uniform(0.05, 0.95, 100)
    div = tangential_divergence(curve, s,
                                lambda P: curve.normal_extension(P))
    assert np.max(np.abs(div - curve.curvature(s))) < 1e-6


def test_normal_derivative_of_curvature():
    """d H / d nu = -H^2 for the signed-distance extension (circle)."""
    c = ParamCurve.circle(radius=1.0, n=2500, clockwise=True)
    s = np.array([0.2, 0.55, 0.83])
    h = 2e-4

    def H_ext(Q):
        d = np.empty((Q.shape[0], 5))
        for k, (ox, oy) in enumerate(((0, 0), (h, 0), (-h, 0), (0, h), (0, -h))):
            d[:, k] = c.project(Q + np.array([ox, oy]))[1]
        return (d[:, 1] + d[:, 2] + d[:, 3] + d[:, 4] - 4 * d[:, 0]) / h ** 2

    P = c.point(s)
    nu = c.normal(s)
    dH = (H_ext(P + h * nu) - H_ext(P - h * nu)) / (2 * h)
    assert np.max(np.abs(dH + c.curvature(s) ** 2)) < 1e-3


def test_reach_and_simplicity():
    c = ParamCurve.circle(radius=1.0, n=1500)
    assert 0.9 < c.reach <= 1.0
    assert c.is_simple()
