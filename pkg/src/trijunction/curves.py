"""Oriented planar arcs with arc-length cubic-spline parametrization.

A ParamCurve is the single geometric primitive of the package: an oriented
C^2 arc gamma : [0,1] -> R^2 stored as a pair of cubic splines in a
parameter proportional to arc length.  The unit normal is the +90 degree
(counterclockwise) rotation of the unit tangent times an orientation flag,
and the curvature H is div(nu) for the signed-distance extension of nu, so
that a circle with outward normal has H = +1/R.
"""

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GeometryError, ProjectionError

_GAUSS_CACHE = {}


def gauss_legendre(n):
    """Nodes/weights on [0,1], cached."""
    if n not in _GAUSS_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GAUSS_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GAUSS_CACHE[n]


def rot90(v):
    """Counterclockwise quarter turn of vectors with last axis = 2."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


class ParamCurve:
    """Planar arc gamma: [0,1] -> R^2 as an arc-length-rescaled cubic spline.

    Parameters
    ----------
    points : (k, 2) array
        Interpolation points, ordered along the curve.
    closed : bool
        Closed curve (periodic spline) instead of an open arc.
    flag : +1 or -1
        Orientation flag: nu = flag * rot90(tau).
    resample : int or None
        Number of knots after arc-length resampling (default: keep k).
    end_tangents : ((2,), (2,)) or None
        Exact end derivatives d gamma/dt (clamped spline); open curves only.
    """

    def __init__(self, points, closed=False, flag=1, resample=None,
                 end_tangents=None, _resample_passes=2):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] < 4:
            raise GeometryError("need at least 4 points for a cubic spline")
        if flag not in (1, -1):
            raise GeometryError("orientation flag must be +1 or -1")
        self.closed = bool(closed)
        self.flag = int(flag)
        self.control_points = pts.copy()
        self.end_tangents = (None if end_tangents is None else
                             (np.asarray(end_tangents[0], float).copy(),
                              np.asarray(end_tangents[1], float).copy()))
        self._build(pts, resample, end_tangents, _resample_passes)
        self._reach = None

    def with_flag(self, flag):
        """Same geometry with the other normal orientation."""
        return ParamCurve(self.control_points, closed=self.closed, flag=flag,
                          end_tangents=self.end_tangents)

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------
    def _build(self, pts, resample, end_tangents, passes):
        if self.closed and np.linalg.norm(pts[0] - pts[-1]) > 1e-12:
            pts = np.vstack([pts, pts[0]])
        n = resample if resample is not None else pts.shape[0]
        # chord-length parameter first, then iterate to (near) arc length
        t = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
        if t[-1] <= 0:
            raise GeometryError("coincident interpolation points")
        chord = t[-1]
        t /= t[-1]
        if np.any(np.diff(t) <= 0):
            raise GeometryError("repeated interpolation points")
        sx, sy = self._fit(t, pts[:, 0], pts[:, 1], end_tangents, chord)
        for _ in range(passes):
            sx, sy, t = self._arclength_pass(sx, sy, n, end_tangents)
        self._sx, self._sy = sx, sy
        self.knots = t
        self.length = self._measure_length(sx, sy)
        if np.min(np.hypot(sx(t, 1), sy(t, 1))) < 1e-10 * self.length:
            raise GeometryError("degenerate parametrization: |gamma'| ~ 0")

    def _fit(self, t, px, py, end_tangents, scale):
        if self.closed:
            return (CubicSpline(t, px, bc_type="periodic"),
                    CubicSpline(t, py, bc_type="periodic"))
        if end_tangents is None:
            return (CubicSpline(t, px, bc_type="natural"),
                    CubicSpline(t, py, bc_type="natural"))
        d0 = np.asarray(end_tangents[0], float)
        d1 = np.asarray(end_tangents[1], float)
        d0 = d0 / np.linalg.norm(d0) * scale
        d1 = d1 / np.linalg.norm(d1) * scale
        return (CubicSpline(t, px, bc_type=((1, d0[0]), (1, d1[0]))),
                CubicSpline(t, py, bc_type=((1, d0[1]), (1, d1[1]))))

    def _arclength_pass(self, sx, sy, n, end_tangents):
        tf = np.linspace(0.0, 1.0, max(8 * n, 1024))
        sp = np.hypot(sx(tf, 1), sy(tf, 1))
        arc = np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) * np.diff(tf))])
        total = arc[-1]
        arc /= total
        # parameters equi-distributed in arc length
        t_new = np.interp(np.linspace(0.0, 1.0, n), arc, tf)
        px, py = sx(t_new), sy(t_new)
        u = np.linspace(0.0, 1.0, n)
        if self.closed:
            px[-1], py[-1] = px[0], py[0]
        sx2, sy2 = self._fit(u, px, py, end_tangents, total)
        return sx2, sy2, u

    @staticmethod
    def _measure_length(sx, sy, n=4096):
        tf = np.linspace(0.0, 1.0, n)
        sp = np.hypot(sx(tf, 1), sy(tf, 1))
        return float(np.trapezoid(sp, tf))

    # ------------------------------------------------------------------
    # constructors for standard shapes
    # ------------------------------------------------------------------
    @classmethod
    def line(cls, a, b, n=16):
        a, b = np.asarray(a, float), np.asarray(b, float)
        pts = a[None, :] + np.linspace(0.0, 1.0, max(n, 4))[:, None] * (b - a)[None, :]
        return cls(pts, end_tangents=(b - a, b - a))

    @classmethod
    def circle(cls, center=(0.0, 0.0), radius=1.0, n=2000, clockwise=False):
        th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        if clockwise:
            th = -th
        c = np.asarray(center, float)
        pts = c + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
        return cls(pts, closed=True)

    @classmethod
    def arc(cls, center, radius, th0, th1, n=1200):
        th = np.linspace(th0, th1, max(n, 8))
        c = np.asarray(center, float)
        pts = c + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
        t0 = radius * np.array([-np.sin(th0), np.cos(th0)]) * np.sign(th1 - th0)
        t1 = radius * np.array([-np.sin(th1), np.cos(th1)]) * np.sign(th1 - th0)
        return cls(pts, end_tangents=(t0, t1))

    @classmethod
    def from_samples(cls, samples, closed=False, flag=1):
        """Refit a curve through dense samples (e.g. the image of a flow)."""
        return cls(samples, closed=closed, flag=flag)

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------
    def point(self, s):
        s = np.asarray(s, dtype=float)
        return np.stack([self._sx(s), self._sy(s)], axis=-1)

    def velocity(self, s):
        s = np.asarray(s, dtype=float)
        return np.stack([self._sx(s, 1), self._sy(s, 1)], axis=-1)

    def accel(self, s):
        s = np.asarray(s, dtype=float)
        return np.stack([self._sx(s, 2), self._sy(s, 2)], axis=-1)

    def tangent(self, s):
        v = self.velocity(s)
        sp = np.linalg.norm(v, axis=-1, keepdims=True)
        if np.any(sp < 1e-14):
            raise GeometryError("degenerate parametrization at requested parameter")
        return v / sp

    def normal(self, s):
        return self.flag * rot90(self.tangent(s))

    def curvature(self, s):
        """H = div(nu) for the signed-distance extension of nu."""
        v, a = self.velocity(s), self.accel(s)
        sp2 = np.sum(v * v, axis=-1)
        num = v[..., 0] * a[..., 1] - v[..., 1] * a[..., 0]
        return -self.flag * num / sp2 ** 1.5

    def arclength(self, s):
        """Arc length from parameter 0 to s (parameter is near-proportional)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        for i, si in enumerate(s):
            tf = np.linspace(0.0, si, 256)
            sp = np.hypot(self._sx(tf, 1), self._sy(tf, 1))
            out[i] = np.trapezoid(sp, tf)
        return out if out.size > 1 else float(out[0])

    def endpoints(self):
        return self.point(0.0), self.point(1.0)

    def outward_tangent(self, end):
        """Unit tangent pointing out of the arc at s=0 or s=1."""
        if self.closed:
            raise GeometryError("closed curves have no endpoints")
        if end == 0:
            return -self.tangent(0.0)
        return self.tangent(1.0)

    def reversed(self):
        pts = self.point(np.linspace(1.0, 0.0, len(self.knots)))
        return ParamCurve(pts, closed=self.closed, flag=-self.flag)

    # ------------------------------------------------------------------
    # projection / signed distance
    # ------------------------------------------------------------------
    @property
    def reach(self):
        """Tubular-neighborhood radius: min(1/max|H|, half min self-distance)."""
        if self._reach is None:
            ss = np.linspace(0.0, 1.0, 600)
            hmax = np.max(np.abs(self.curvature(ss))) + 1e-30
            pts = self.point(ss)
            chord = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1))
            gap = np.abs(ss[:, None] - ss[None, :])
            if self.closed:
                gap = np.minimum(gap, 1.0 - gap)
            # a near self-intersection shows as a chord much shorter than the
            # along-curve separation; adjacent samples never qualify
            close = chord < 0.5 * gap * self.length
            self_d = np.min(chord[close]) if np.any(close) else np.inf
            self._reach = float(min(1.0 / hmax, 0.5 * self_d))
        return self._reach

    def project(self, x, require_interior=False):
        """Closest-point parameters for points x, Newton-polished.

        Returns (s, d, interior) where d is the signed distance along nu and
        interior marks points whose foot is not clamped to an endpoint.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        scan = self.knots if len(self.knots) >= 128 else np.linspace(0.0, 1.0, 256)
        pts = self.point(scan)
        # chunked to bound memory
        s = np.empty(x.shape[0])
        for lo in range(0, x.shape[0], 4096):
            hi = min(lo + 4096, x.shape[0])
            d2 = np.sum((x[lo:hi, None, :] - pts[None, :, :]) ** 2, axis=-1)
            s[lo:hi] = scan[np.argmin(d2, axis=1)]
        for _ in range(30):
            g = self.point(s)
            v = self.velocity(s)
            a = self.accel(s)
            r = x - g
            f = np.sum(r * v, axis=-1)
            fp = np.sum(r * a, axis=-1) - np.sum(v * v, axis=-1)
            step = np.where(np.abs(fp) > 1e-30, f / fp, 0.0)
            s_new = s - step
            if self.closed:
                s_new = np.mod(s_new, 1.0)
            else:
                s_new = np.clip(s_new, 0.0, 1.0)
            if np.max(np.abs(s_new - s)) < 1e-14:
                s = s_new
                break
            s = s_new
        foot = self.point(s)
        nu = self.normal(s)
        d = np.sum((x - foot) * nu, axis=-1)
        off = np.linalg.norm(x - foot - d[:, None] * nu, axis=-1)
        interior = self.closed | ((s > 1e-12) & (s < 1.0 - 1e-12)) | (off < 1e-9 * (1.0 + np.abs(d)))
        if require_interior and not np.all(interior):
            raise ProjectionError("projection clamps to an endpoint")
        return s, d, interior

    def signed_distance(self, x):
        """Signed distance for a single point in the tubular neighborhood."""
        x = np.asarray(x, dtype=float)
        s, d, interior = self.project(x[None, :])
        if abs(d[0]) > self.reach * (1.0 + 1e-9):
            raise ProjectionError("point outside the tubular neighborhood")
        if not interior[0]:
            raise ProjectionError("projection falls on the arc endpoint")
        return float(d[0])

    def distance_to_set(self, x):
        """Unsigned distance from points x to the (closed) arc, endpoints included."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s, d, _ = self.project(x)
        return np.linalg.norm(x - self.point(s), axis=-1)

    def normal_extension(self, x):
        """nu extended off the curve by closest-point projection (= grad of signed dist)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s, _, _ = self.project(x)
        return self.normal(s)

    # ------------------------------------------------------------------
    # curve integrals
    # ------------------------------------------------------------------
    def integrate(self, fn, order=12, panels=None):
        """Composite Gauss quadrature of a scalar function of the parameter.

        fn(s) may return scalars or vectors sampled at parameters s; the
        integral is with respect to arc length.
        """
        npan = panels if panels is not None else max(16, len(self.knots) // 4)
        xg, wg = gauss_legendre(order)
        edges = np.linspace(0.0, 1.0, npan + 1)
        s = (edges[:-1, None] + np.diff(edges)[:, None] * xg[None, :]).ravel()
        w = (np.diff(edges)[:, None] * wg[None, :]).ravel()
        sp = np.linalg.norm(self.velocity(s), axis=-1)
        vals = np.asarray(fn(s))
        return np.sum(vals * w * sp, axis=-1)

    def is_simple(self, tol=1e-9):
        ss = np.linspace(0.0, 1.0, 400)
        pts = self.point(ss)
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        gap = np.abs(ss[:, None] - ss[None, :])
        if self.closed:
            gap = np.minimum(gap, 1.0 - gap)
        far = gap > 0.05
        return bool(np.all(d2[far] > tol ** 2))


# ----------------------------------------------------------------------
# tangential calculus for ambient fields restricted to a curve
# ----------------------------------------------------------------------

def tangential_gradient(curve, s, grad_fn):
    """nabla_Gamma f = (grad f . tau) tau for an ambient scalar field."""
    s = np.atleast_1d(np.asarray(s, float))
    tau = curve.tangent(s)
    g = np.atleast_2d(np.asarray(grad_fn(curve.point(s)), float))
    return np.sum(g * tau, axis=-1)[:, None] * tau


def tangential_gradient_curvewise(curve, s, values_fn, ds=1e-5):
    """d/d(arclength) of a scalar defined on the curve, times tau."""
    s = np.atleast_1d(np.asarray(s, float))
    sp = np.linalg.norm(curve.velocity(s), axis=-1)
    f1 = np.asarray(values_fn(np.clip(s + ds, 0.0, 1.0)), float)
    f0 = np.asarray(values_fn(np.clip(s - ds, 0.0, 1.0)), float)
    dd = np.clip(s + ds, 0.0, 1.0) - np.clip(s - ds, 0.0, 1.0)
    dfds = (f1 - f0) / dd / sp
    return dfds[:, None] * curve.tangent(s)


def tangential_divergence(curve, s, field, jac=None):
    """div_Gamma g = tau . (Dg[tau]) for an ambient vector field g.

    If jac is None the field is differentiated along the curve (enough for
    fields known only on the curve).
    """
    s = np.atleast_1d(np.asarray(s, float))
    tau = curve.tangent(s)
    if jac is not None:
        J = np.asarray(jac(curve.point(s)), float)
        return np.einsum("ni,nij,nj->n", tau, J, tau)
    sp = np.linalg.norm(curve.velocity(s), axis=-1)
    ds = 1e-6
    sm, sp_ = np.clip(s - ds, 0.0, 1.0), np.clip(s + ds, 0.0, 1.0)
    g1 = np.asarray(field(curve.point(sp_)), float)
    g0 = np.asarray(field(curve.point(sm)), float)
    dg = (g1 - g0) / (sp_ - sm)[:, None] / sp[:, None]
    return np.sum(tau * dg, axis=-1)


def divergence_formula_check(curve, field, jac=None, order=12, panels=512):
    """Both sides of int_gamma div_gamma g = int_gamma H (g.nu) + sum_bdry g.eta.

    Returns (lhs, rhs).
    """
    lhs = curve.integrate(lambda s: tangential_divergence(curve, s, field, jac),
                          order=order, panels=panels)
    rhs = curve.integrate(
        lambda s: curve.curvature(s) * np.sum(np.asarray(field(curve.point(s)), float)
                                              * curve.normal(s), axis=-1),
        order=order, panels=panels)
    if not curve.closed:
        for end in (0, 1):
            x = curve.point(float(end))
            eta = curve.outward_tangent(end)
            rhs += float(np.dot(np.asarray(field(x[None, :]), float)[0], eta))
    return float(lhs), float(rhs)
