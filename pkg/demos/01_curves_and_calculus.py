"""Curves, frames, curvature and the tangential calculus.

Builds a few arcs, checks the divergence and area formulas by quadrature,
and verifies the signed-distance machinery.
"""
import numpy as np

from trijunction import ParamCurve, Diffeo
from trijunction.curves import divergence_formula_check, tangential_divergence
from trijunction.diffeo import area_formula_check

print("-- frames and curvature --")
circle = ParamCurve.circle(radius=2.0, n=2000, clockwise=True)
s = np.linspace(0, 1, 5, endpoint=False)
print("clockwise circle of radius 2: H =", np.round(circle.curvature(s), 6),
      "(outward normal convention: +1/R)")

quarter = ParamCurve.arc((0, 0), 1.0, 0.0, np.pi / 2, n=1200)
print("quarter arc: normals radial to",
      np.max(np.abs(np.abs(np.sum(quarter.normal(s) * quarter.point(s), axis=1)) - 1)))

print("\n-- signed distance --")
p = np.array([1.3 * np.cos(0.7), 1.3 * np.sin(0.7)])
one = ParamCurve.circle(radius=1.0, n=2000, clockwise=True)
print("point at radius 1.3:", one.signed_distance(p), "(expected 0.3)")

print("\n-- divergence formula: int div_G g = int H g.nu + boundary --")
jac_id = lambda P: np.tile(np.eye(2), (len(P), 1, 1))
lhs, rhs = divergence_formula_check(quarter, lambda P: P, jac_id, panels=512)
print("identity field on the quarter arc: lhs %.12f rhs %.12f" % (lhs, rhs))

print("\n-- area formula under a near-identity map --")
phi = Diffeo(lambda P: 0.04 * np.stack(
    [np.sin(1.3 * np.atleast_2d(P)[:, 1]), np.cos(1.7 * np.atleast_2d(P)[:, 0])], axis=1))
f = lambda P: 1.0 + np.atleast_2d(P)[:, 0] ** 2
lhs, rhs = area_formula_check(phi, quarter, f)
print("int over the image vs pulled back: %.10f vs %.10f" % (lhs, rhs))

print("\n-- H equals the tangential divergence of the extended normal --")
wav = ParamCurve(np.stack([np.linspace(-0.5, 0.5, 1200),
                           0.3 * np.sin(2 * np.linspace(-0.5, 0.5, 1200))], axis=1))
ss = np.linspace(0.1, 0.9, 7)
div = tangential_divergence(wav, ss, lambda P: wav.normal_extension(P))
print("max |div_G nu - H| =", np.max(np.abs(div - wav.curvature(ss))))
