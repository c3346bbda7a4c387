"""Quadratic Lagrange finite elements on the slit meshes.

Isoparametric P2 elements (curved edges along the crack and the outer
boundary), sparse direct solves with cached factorizations, two-sided crack
traces, and the weak crack loads used by the shape-derivative and stability
solves: the duality pairing < div_Gamma(q grad_Gamma u), z > is realized by
tangential integration by parts edge-wise along each arm.
"""

import logging
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .errors import SolveError, AdmissibilityError
from .crackmesh import DIRICHLET, NEU_OUTER
from .curves import gauss_legendre

log = logging.getLogger("trijunction.fem")

# Dunavant degree-5 rule (7 points) on the reference triangle
_TRI_Q = np.array([
    [1 / 3, 1 / 3, 0.225],
    [0.059715871789770, 0.470142064105115, 0.132394152788506],
    [0.470142064105115, 0.059715871789770, 0.132394152788506],
    [0.470142064105115, 0.470142064105115, 0.132394152788506],
    [0.797426985353087, 0.101286507323456, 0.125939180544827],
    [0.101286507323456, 0.797426985353087, 0.125939180544827],
    [0.101286507323456, 0.101286507323456, 0.125939180544827],
])


def p2_basis(xi, eta):
    """P2 shape functions and reference gradients, vectorized over (xi, eta).

    Returns N with shape (..., 6) and dN with shape (..., 6, 2).
    """
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    lam = np.stack([1.0 - xi - eta, xi, eta], axis=-1)          # (..., 3)
    N = np.concatenate([
        lam * (2 * lam - 1),
        np.stack([4 * lam[..., 0] * lam[..., 1],
                  4 * lam[..., 1] * lam[..., 2],
                  4 * lam[..., 2] * lam[..., 0]], axis=-1)], axis=-1)
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])     # (3, 2)
    dN = np.empty(lam.shape[:-1] + (6, 2))
    for k in range(3):
        dN[..., k, :] = (4 * lam[..., k] - 1)[..., None] * dlam[k]
    dN[..., 3, :] = 4 * (lam[..., 0, None] * dlam[1] + lam[..., 1, None] * dlam[0])
    dN[..., 4, :] = 4 * (lam[..., 1, None] * dlam[2] + lam[..., 2, None] * dlam[1])
    dN[..., 5, :] = 4 * (lam[..., 2, None] * dlam[0] + lam[..., 0, None] * dlam[2])
    return N, dN


_BASIS_CACHE = {}


def _basis_tables(points):
    key = points.tobytes()
    if key not in _BASIS_CACHE:
        Ns, dNs = [], []
        for xi, eta in points:
            N, dN = p2_basis(xi, eta)
            Ns.append(N)
            dNs.append(dN)
        _BASIS_CACHE[key] = (np.asarray(Ns), np.asarray(dNs))
    return _BASIS_CACHE[key]


def _quad_points(subdivide=0):
    """Dunavant rule, optionally on a 4^k uniform split of the triangle."""
    pts = _TRI_Q[:, :2]
    w = _TRI_Q[:, 2] * 0.5
    for _ in range(subdivide):
        l0 = 1.0 - pts[:, 0] - pts[:, 1]
        sub = []
        subw = []
        corners = [((0, 0), (0.5, 0), (0, 0.5)), ((0.5, 0), (1, 0), (0.5, 0.5)),
                   ((0, 0.5), (0.5, 0.5), (0, 1)), ((0.5, 0.5), (0, 0.5), (0.5, 0))]
        for (a, b, c) in corners:
            a, b, c = map(np.asarray, (a, b, c))
            sub.append(a + np.outer(pts[:, 0], b - a) + np.outer(pts[:, 1], c - a))
            subw.append(w * 0.25)
        pts = np.vstack(sub)
        w = np.concatenate(subw)
    return pts, w


class Assembly:
    """Element tables reused by the stiffness matrix and energy quadratures."""

    def __init__(self, mesh, subdivide=0):
        self.mesh = mesh
        pts, w = _quad_points(subdivide)
        N, dN = _basis_tables(pts)     # (nq, 6), (nq, 6, 2)
        X = mesh.vx[mesh.tris]         # (nt, 6, 2)
        J = np.einsum("qak,nad->nqdk", dN, X)   # (nt, nq, 2(space), 2(ref))
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(det <= 0):
            raise SolveError("non-positive isoparametric Jacobian")
        inv = np.empty_like(J)
        inv[..., 0, 0] = J[..., 1, 1]
        inv[..., 0, 1] = -J[..., 0, 1]
        inv[..., 1, 0] = -J[..., 1, 0]
        inv[..., 1, 1] = J[..., 0, 0]
        inv /= det[..., None, None]
        # physical gradients of shape functions: (nt, nq, 6, 2)
        self.gradN = np.einsum("nqkd,qak->nqad", inv, dN)
        self.N = N
        self.wdet = w[None, :] * det
        self.qpoints = np.einsum("qa,nad->nqd", N, X)

    def stiffness(self):
        K = np.einsum("nqad,nqbd,nq->nab", self.gradN, self.gradN, self.wdet)
        t = self.mesh.tris
        rows = np.repeat(t, 6, axis=1).ravel()
        cols = np.tile(t, (1, 6)).ravel()
        A = sp.coo_matrix((K.ravel(), (rows, cols)),
                          shape=(self.mesh.n_nodes, self.mesh.n_nodes))
        return A.tocsr()

    def energy(self, values, elem_select=None):
        """int |grad u_h|^2 over selected elements (exact for the P2 space)."""
        g = np.einsum("nqad,na->nqd", self.gradN, values[self.mesh.tris])
        e = np.sum(np.sum(g * g, axis=-1) * self.wdet, axis=1)
        if elem_select is None:
            return float(np.sum(e))
        return float(np.sum(e[elem_select]))

    def integrate(self, fn, elem_select=None):
        vals = fn(self.qpoints.reshape(-1, 2)).reshape(self.wdet.shape)
        e = np.sum(vals * self.wdet, axis=1)
        if elem_select is None:
            return float(np.sum(e))
        return float(np.sum(e[elem_select]))

    def interpolate(self, values):
        """Nodal field at the quadrature points, shape (nt, nq)."""
        return np.einsum("qa,na->nq", self.N, values[self.mesh.tris])

    def l2_error(self, values, exact_fn):
        ex = np.asarray(exact_fn(self.qpoints.reshape(-1, 2)), float)
        diff = self.interpolate(values) - ex.reshape(self.wdet.shape)
        return float(np.sqrt(np.sum(diff ** 2 * self.wdet)))


class Operator:
    """Stiffness operator with cached sparse factorizations per pin set."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.asm = Assembly(mesh)
        self.A = self.asm.stiffness()
        self._factors = {}
        self.node_sector = self._node_sectors()

    def _node_sectors(self):
        ns = -np.ones(self.mesh.n_nodes, dtype=int)
        for s in range(3):
            ns[np.unique(self.mesh.tris[self.mesh.sector == s])] = s
        return ns

    def _factor(self, pinned):
        key = pinned.tobytes()
        if key not in self._factors:
            free = np.setdiff1d(np.arange(self.mesh.n_nodes), pinned, assume_unique=False)
            A_ff = self.A[free][:, free].tocsc()
            try:
                lu = spla.splu(A_ff)
            except RuntimeError as exc:
                raise SolveError("factorization failed: %s" % exc)
            self._factors[key] = (free, lu)
            log.info("factorized %d x %d system (nnz %d)", free.size, free.size, A_ff.nnz)
        return self._factors[key]

    def solve_pinned(self, pinned, pin_values, rhs=None):
        """Solve A u = rhs with u fixed on the pinned nodes (rhs may be 2-D)."""
        pinned = np.asarray(pinned, dtype=int)
        for s in range(3):
            sec_nodes = self.node_sector == s
            if not np.any(np.isin(np.where(sec_nodes)[0], pinned)):
                raise SolveError("singular system: sector %d has no pinned node" % s)
        free, lu = self._factor(pinned)
        n = self.mesh.n_nodes
        multi = rhs is not None and np.ndim(rhs) == 2
        ncol = rhs.shape[1] if multi else 1
        u = np.zeros((n, ncol))
        u[pinned] = np.asarray(pin_values, dtype=float).reshape(len(pinned), -1)
        b = np.zeros((n, ncol))
        if rhs is not None:
            b += rhs.reshape(n, -1)
        b_f = b[free] - self.A[free][:, pinned] @ u[pinned]
        u[free] = lu.solve(b_f)
        res = np.abs(self.A[free] @ u - b[free]).max()
        scale = max(1.0, np.abs(u).max())
        log.info("solve residual %.3e (scale %.3e)", res, scale)
        if res > 1e-8 * scale:
            raise SolveError("solver residual %.3e too large" % res)
        return u if multi else u[:, 0]


class CrackField:
    """Scalar P2 field on a CrackMesh with sector-wise evaluation and traces."""

    def __init__(self, mesh, values, operator=None):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float)
        self.operator = operator
        self._locators = {}

    # ---------------------------------------------------------------- eval
    def _locator(self, sector):
        if sector not in self._locators:
            sel = np.where(self.mesh.sector == sector)[0]
            cen = self.mesh.vx[self.mesh.tris[sel, :3]].mean(axis=1)
            self._locators[sector] = (sel, cKDTree(cen))
        return self._locators[sector]

    def _locate(self, P, sector, k=20):
        sel, tree = self._locator(sector)
        _, cand = tree.query(P, k=min(k, len(sel)))
        cand = np.atleast_2d(cand)
        tris = self.mesh.tris[sel]
        V = self.mesh.vx
        best_t = -np.ones(P.shape[0], dtype=int)
        best_xi = np.zeros((P.shape[0], 2))
        best_q = np.full(P.shape[0], -np.inf)
        for col in range(cand.shape[1]):
            t = tris[cand[:, col]]
            a, b, c = V[t[:, 0]], V[t[:, 1]], V[t[:, 2]]
            M = np.stack([b - a, c - a], axis=-1)
            det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
            r = P - a
            xi = (M[:, 1, 1] * r[:, 0] - M[:, 0, 1] * r[:, 1]) / det
            eta = (-M[:, 1, 0] * r[:, 0] + M[:, 0, 0] * r[:, 1]) / det
            q = np.minimum(np.minimum(xi, eta), 1.0 - xi - eta)
            better = q > best_q
            best_q = np.where(better, q, best_q)
            best_t = np.where(better, cand[:, col], best_t)
            best_xi[better] = np.stack([xi, eta], axis=1)[better]
        return sel[best_t], best_xi, best_q

    def _newton_refine(self, P, telem, xi, iters=4):
        X = self.mesh.vx[self.mesh.tris[telem]]
        for _ in range(iters):
            N, dN = p2_basis(xi[:, 0], xi[:, 1])
            pos = np.einsum("na,nad->nd", N, X)
            J = np.einsum("nak,nad->ndk", dN, X)
            r = P - pos
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            dxi = np.empty_like(r)
            dxi[:, 0] = (J[:, 1, 1] * r[:, 0] - J[:, 0, 1] * r[:, 1]) / det
            dxi[:, 1] = (-J[:, 1, 0] * r[:, 0] + J[:, 0, 0] * r[:, 1]) / det
            xi = xi + dxi
        return xi

    def eval(self, P, sector, grad=False):
        """Field (and gradient) at points inside the given sector."""
        P = np.atleast_2d(np.asarray(P, float))
        telem, xi, q = self._locate(P, sector)
        if np.any(q < -0.2):
            raise SolveError("evaluation point far outside sector %d" % sector)
        xi = self._newton_refine(P, telem, xi)
        X = self.mesh.vx[self.mesh.tris[telem]]
        U = self.values[self.mesh.tris[telem]]
        N, dN = p2_basis(xi[:, 0], xi[:, 1])
        out_v = np.einsum("na,na->n", N, U)
        if not grad:
            return out_v
        J = np.einsum("nak,nad->ndk", dN, X)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invT = np.empty_like(J)
        invT[:, 0, 0] = J[:, 1, 1]
        invT[:, 0, 1] = -J[:, 1, 0]
        invT[:, 1, 0] = -J[:, 0, 1]
        invT[:, 1, 1] = J[:, 0, 0]
        invT /= det[:, None, None]
        gref = np.einsum("nak,na->nk", dN, U)
        out_g = np.einsum("nkd,nd->nk", invT, gref)
        return out_v, out_g

    # ---------------------------------------------------------------- traces
    def trace(self, arm_idx, side):
        """TraceFn for one side ('plus'/'minus') of one arm."""
        rec = self.mesh.crack[arm_idx]
        ids = rec[side]
        return TraceFn(self.mesh, ids, rec["s"], self.values)

    def traces(self, arm_idx):
        return self.trace(arm_idx, "plus"), self.trace(arm_idx, "minus")

    def energy(self, region=None, subdivide=0):
        """Dirichlet energy over 'U' (masked elements), everything, or a mask."""
        asm = Assembly(self.mesh, subdivide) if subdivide else \
            (self.operator.asm if self.operator is not None else Assembly(self.mesh))
        if region is None:
            sel = None
        elif isinstance(region, str) and region == "U":
            if self.mesh.elem_mask is None:
                raise SolveError("mesh carries no admissible-subdomain mask")
            sel = self.mesh.elem_mask
        else:
            sel = region
        return asm.energy(self.values, sel)

    def dump(self, stream):
        stream.write("# trijunction field, mesh %s\n" % self.mesh.content_hash())
        for v in self.values:
            stream.write("%.17g\n" % v)


class TraceFn:
    """One-sided crack trace as a piecewise-quadratic function of arm param.

    Node ids alternate vertex/mid/vertex along the arm; geometry is the
    (possibly morphed) quadratic edge map, so tangential derivatives are with
    respect to arc length of the actual discrete crack.
    """

    def __init__(self, mesh, ids, s_params, values):
        self.mesh = mesh
        self.ids = np.asarray(ids, dtype=int)
        self.s = np.asarray(s_params, float)
        self.vals = values[self.ids]
        self.n_edges = (len(self.ids) - 1) // 2

    def _edge_of(self, s):
        s_v = self.s[::2]  # vertex params
        e = np.clip(np.searchsorted(s_v, s, side="right") - 1, 0, self.n_edges - 1)
        s0 = s_v[e]
        s1 = s_v[e + 1]
        shat = (s - s0) / (s1 - s0)
        return e, np.clip(shat, 0.0, 1.0)

    @staticmethod
    def _shape1d(shat):
        N = np.stack([(1 - shat) * (1 - 2 * shat), 4 * shat * (1 - shat),
                      shat * (2 * shat - 1)], axis=-1)
        dN = np.stack([4 * shat - 3, 4 - 8 * shat, 4 * shat - 1], axis=-1)
        return N, dN

    def _edge_data(self, e):
        i = 2 * e
        ids = np.stack([self.ids[i], self.ids[i + 1], self.ids[i + 2]], axis=-1)
        return self.mesh.vx[ids], self.vals.reshape(-1)[np.stack([i, i + 1, i + 2], axis=-1)]

    def value(self, s):
        s = np.atleast_1d(np.asarray(s, float))
        e, shat = self._edge_of(s)
        N, _ = self._shape1d(shat)
        _, u = self._edge_data(e)
        return np.sum(N * u, axis=-1)

    def darc(self, s):
        """Tangential derivative d(trace)/d(arclength)."""
        s = np.atleast_1d(np.asarray(s, float))
        e, shat = self._edge_of(s)
        N, dN = self._shape1d(shat)
        X, u = self._edge_data(e)
        dx = np.einsum("...a,...ad->...d", dN, X)
        speed = np.linalg.norm(dx, axis=-1)
        return np.sum(dN * u, axis=-1) / speed

    def position(self, s):
        s = np.atleast_1d(np.asarray(s, float))
        e, shat = self._edge_of(s)
        N, _ = self._shape1d(shat)
        X, _ = self._edge_data(e)
        return np.einsum("...a,...ad->...d", N, X)

    def edge_quadrature(self, order=8):
        """Positions, weights (arc measure) and trace/derivative values at
        Gauss points of every edge; used by all crack-line integrals."""
        xg, wg = gauss_legendre(order)
        e = np.repeat(np.arange(self.n_edges), order)
        shat = np.tile(xg, self.n_edges)
        N, dN = self._shape1d(shat)
        X, u = self._edge_data(e)
        pos = np.einsum("na,nad->nd", N, X)
        dx = np.einsum("na,nad->nd", dN, X)
        speed = np.linalg.norm(dx, axis=-1)
        w = np.tile(wg, self.n_edges) * speed
        val = np.sum(N * u, axis=-1)
        dval = np.sum(dN * u, axis=-1) / speed
        s_v = self.s[::2]
        s_par = s_v[e] + shat * (s_v[e + 1] - s_v[e])
        tangent = dx / speed[:, None]
        return {"pos": pos, "w": w, "val": val, "darc": dval,
                "s": s_par, "edge": e, "tangent": tangent}

    def derivative_jump_indicator(self):
        """Median inter-edge jump of the tangential derivative (noise level)."""
        sv = self.s[::2]
        jumps = []
        for e in range(self.n_edges - 1):
            left = self.darc(np.array([sv[e + 1] - 1e-12]))[0]
            right = self.darc(np.array([sv[e + 1] + 1e-12]))[0]
            jumps.append(abs(left - right))
        return float(np.median(jumps)) if jumps else 0.0


# ----------------------------------------------------------------------
# boundary data and solvers
# ----------------------------------------------------------------------

class SectorConstants:
    """Dirichlet data taking one constant per sector."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    def __call__(self, P, sectors):
        return self.c[sectors]


def _dirichlet_values(op, data):
    mesh = op.mesh
    nodes = mesh.dirichlet_nodes()
    if nodes.size == 0:
        raise SolveError("empty Dirichlet set")
    P = mesh.vx[nodes]
    if isinstance(data, SectorConstants):
        vals = data(P, op.node_sector[nodes])
    else:
        vals = np.asarray(data(P), dtype=float)
    return nodes, vals


def solve_equilibrium(config, mesh, dirichlet_data, neumann_load=None):
    """Harmonic field with the given Dirichlet data, natural elsewhere."""
    op = mesh._operator if hasattr(mesh, "_operator") else Operator(mesh)
    mesh._operator = op
    nodes, vals = _dirichlet_values(op, dirichlet_data)
    rhs = None
    if neumann_load is not None:
        rhs = assemble_boundary_load(mesh, neumann_load)
    u = op.solve_pinned(nodes, vals, rhs)
    return CrackField(mesh, u, op)


def transported_pin_set(mesh):
    """Nodes where u_Phi is constrained: outside U and on the Dirichlet part."""
    if mesh.vertex_mask is None:
        raise SolveError("mesh carries no admissible-subdomain mask")
    pinned = np.where(~mesh.vertex_mask)[0]
    return np.union1d(pinned, mesh.dirichlet_nodes())


def solve_transported(config, mesh_t, u_base):
    """Minimizer of the Dirichlet energy on the transported slit domain,
    constrained to match u_base outside U (and on the Dirichlet part)."""
    op = mesh_t._operator if hasattr(mesh_t, "_operator") else Operator(mesh_t)
    mesh_t._operator = op
    pinned = transported_pin_set(mesh_t)
    base_mesh = u_base.mesh
    same = (base_mesh.n_nodes == mesh_t.n_nodes and
            np.allclose(base_mesh.vx[pinned], mesh_t.vx[pinned], atol=1e-12))
    if same:
        vals = u_base.values[pinned]
    else:
        vals = np.empty(pinned.size)
        for s in range(3):
            selp = op.node_sector[pinned] == s
            if np.any(selp):
                vals[selp] = u_base.eval(mesh_t.vx[pinned[selp]], s)
    u = op.solve_pinned(pinned, vals)
    return CrackField(mesh_t, u, op)


def _h1u_pins(mesh):
    if mesh.vertex_mask is None:
        raise SolveError("mesh carries no admissible-subdomain mask")
    return np.union1d(np.where(~mesh.vertex_mask)[0], mesh.dirichlet_nodes())


class CrackLoadAssembler:
    """Precomputed crack-edge quadrature for many right-hand sides.

    Each call to rhs(q_eval) assembles the weak load for a new scalar factor
    q over the same traces; q_eval(arm_idx, s_params, positions) returns its
    values.  Arm parameters are closest-point projections onto the supplied
    curves, so the same object serves transported configurations.
    """

    def __init__(self, mesh, u, curves, order=8, endpoint_policy="auto"):
        self.mesh = mesh
        self.endpoint_policy = endpoint_policy
        xg, wg = gauss_legendre(order)
        self.entries = []
        # flux convention: the outward normal of the plus component on the
        # crack is -nu, so the Neumann data div_G(q grad_G u+/-) enters the
        # weak form as  int_G [ (.)^- z^- - (.)^+ z^+ ]  (validated against
        # finite differences of the transported solutions)
        for arm_idx in range(3):
            rec = mesh.crack[arm_idx]
            for side, sgn in (("plus", -1.0), ("minus", 1.0)):
                tf = TraceFn(mesh, rec[side], rec["s"], u.values)
                quad = tf.edge_quadrature(order)
                s_proj, _, _ = curves[arm_idx].project(quad["pos"])
                nE = tf.n_edges
                shat = np.tile(xg, nE)
                _, dN = TraceFn._shape1d(shat)
                e = np.repeat(np.arange(nE), order)
                w = np.tile(wg, nE)
                ids = np.stack([tf.ids[2 * e], tf.ids[2 * e + 1],
                                tf.ids[2 * e + 2]], axis=-1)
                indicator = tf.derivative_jump_indicator()
                ends = []
                for s_end, esgn in ((1.0, 1.0), (0.0, -1.0)):
                    du = float(tf.darc(np.array([s_end]))[0])
                    keep = endpoint_policy == "always" or (
                        endpoint_policy == "auto" and abs(du) > 10.0 * indicator)
                    node = tf.ids[-1] if s_end == 1.0 else tf.ids[0]
                    pos_end = tf.position(np.array([s_end]))
                    s_end_proj, _, _ = curves[arm_idx].project(pos_end)
                    ends.append({"node": int(node), "du": du, "esgn": esgn,
                                 "kept": bool(keep and endpoint_policy != "never"),
                                 "s": float(s_end_proj[0]), "pos": pos_end,
                                 "arm": arm_idx, "side": side, "end": s_end})
                self.entries.append({
                    "arm": arm_idx, "sgn": sgn, "ids": ids, "dN": dN,
                    "w": w, "darc": quad["darc"], "pos": quad["pos"],
                    "s": s_proj, "ends": ends})

    def rhs(self, q_eval):
        b = np.zeros(self.mesh.n_nodes)
        for ent in self.entries:
            qv = np.asarray(q_eval(ent["arm"], ent["s"], ent["pos"]), float)
            local = -ent["sgn"] * ((qv * ent["darc"] * ent["w"])[:, None] * ent["dN"])
            np.add.at(b, ent["ids"].ravel(), local.ravel())
            for end in ent["ends"]:
                if end["kept"]:
                    q_end = float(np.asarray(
                        q_eval(ent["arm"], np.array([end["s"]]), end["pos"]), float)[0])
                    b[end["node"]] += ent["sgn"] * end["esgn"] * q_end * end["du"]
        return b

    def endpoint_report(self):
        return [e for ent in self.entries for e in ent["ends"]]


def solve_crack_loaded(mesh, u, assembler, q_eval):
    """Field in H^1_U solving  int grad v . grad z = (crack load for q)."""
    op = mesh._operator if hasattr(mesh, "_operator") else Operator(mesh)
    mesh._operator = op
    b = assembler.rhs(q_eval)
    pinned = _h1u_pins(mesh)
    v = op.solve_pinned(pinned, np.zeros(pinned.size), b.reshape(-1, 1))
    fld = CrackField(mesh, v[:, 0], op)
    fld.endpoint_report = assembler.endpoint_report()
    return fld


def solve_shape_derivative(config, u, V, curves=None, endpoint_policy="auto",
                           tangency_tol=1e-6, assembler=None):
    """Transported-solution derivative: crack data div_G((X.nu) grad_G u).

    V is either a velocity protocol object (normal_speed method) or a plain
    vectorized callable X(P).
    """
    mesh = u.mesh
    arms = curves if curves is not None else config.arms
    if callable(V) and not hasattr(V, "normal_speed"):
        velocity = V

        class _Wrap:
            def normal_speed(self, arm_idx, s, pos, nu):
                return np.sum(np.atleast_2d(velocity(pos)) * nu, axis=1)

            X = staticmethod(velocity)
        V = _Wrap()
    if hasattr(V, "X") and callable(getattr(V, "X", None)):
        tb = np.linspace(0.0, 1.0, 200, endpoint=False)
        Pb = config.outer.point(tb)
        xb = np.atleast_2d(V.X(Pb))
        xn = np.abs(np.sum(xb * config.outer.normal(tb), axis=1))
        if np.max(xn) > max(tangency_tol, 1e-8 * (1 + np.abs(xb).max())):
            raise AdmissibilityError("velocity not tangent to the outer boundary "
                                     "(max X.nu = %.2e)" % np.max(xn))
    if assembler is None:
        assembler = CrackLoadAssembler(mesh, u, arms, endpoint_policy=endpoint_policy)

    def q_eval(arm_idx, s, pos):
        return V.normal_speed(arm_idx, s, pos, arms[arm_idx].normal(s))

    return solve_crack_loaded(mesh, u, assembler, q_eval)


def solve_vphi(config, u, phi, curves=None, endpoint_policy="auto", assembler=None):
    """Stability-form field: crack data div_G(phi grad_G u)."""
    mesh = u.mesh
    arms = curves if curves is not None else config.arms
    if assembler is None:
        assembler = CrackLoadAssembler(mesh, u, arms, endpoint_policy=endpoint_policy)
    return solve_crack_loaded(mesh, u, assembler,
                              lambda arm_idx, s, pos: phi.eval(arm_idx, s))


def assemble_boundary_load(mesh, g, tags=(NEU_OUTER,), order=8):
    """int_boundary g z ds over boundary edges with the given tags."""
    xg, wg = gauss_legendre(order)
    b = np.zeros(mesh.n_nodes)
    for (na, mid, nb, tag, ta, tb) in mesh.bdry:
        if tag not in tags:
            continue
        ids = np.array([na, mid, nb])
        X = mesh.vx[ids]
        N, dN = TraceFn._shape1d(xg)
        pos = N @ X
        dx = dN @ X
        speed = np.linalg.norm(dx, axis=-1)
        vals = np.asarray(g(pos), float)
        b[ids] += (wg * speed * vals) @ N
    return b


def dirichlet_energy(field, region=None, subdivide=0):
    return field.energy(region, subdivide)


# ----------------------------------------------------------------------
# nested refinement (exact geometric nesting: children evaluate the parent
# quadratic map, so the discrete spaces are nested and minimum energies
# decrease monotonically)
# ----------------------------------------------------------------------

_CHILD_REF = [
    # child corner/mid reference coordinates inside the parent triangle
    [(0, 0), (0.5, 0), (0, 0.5), (0.25, 0), (0.25, 0.25), (0, 0.25)],
    [(0.5, 0), (1, 0), (0.5, 0.5), (0.75, 0), (0.75, 0.25), (0.5, 0.25)],
    [(0, 0.5), (0.5, 0.5), (0, 1), (0.25, 0.5), (0.25, 0.75), (0, 0.75)],
    [(0.5, 0.5), (0, 0.5), (0.5, 0), (0.25, 0.5), (0.25, 0.25), (0.5, 0.25)],
]


def refine_uniform(mesh):
    """One level of red refinement with exactly nested P2 geometry."""
    from .crackmesh import CrackMesh

    key_to_id = {}
    new_xy = []

    def node_at(parent_tri, ref_pt, key):
        if key in key_to_id:
            return key_to_id[key]
        N, _ = p2_basis(*ref_pt)
        xy = N @ mesh.vx[mesh.tris[parent_tri]]
        key_to_id[key] = len(new_xy)
        new_xy.append(xy)
        return key_to_id[key]

    # corner vertices of children: parent corners + parent midnodes
    tris_new = []
    sec_new = []
    ref6 = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5)]
    # first pass: all child corners (global by parent node id)
    for t in range(mesh.n_tris):
        for a in range(6):
            node_at(t, ref6[a], ("p", int(mesh.tris[t, a])))
    n_vertex_new = len(new_xy)
    for t in range(mesh.n_tris):
        for child in _CHILD_REF:
            conn = []
            for pt in child[:3]:
                # map child corner ref to a parent node key
                idx = ref6.index(pt)
                conn.append(key_to_id[("p", int(mesh.tris[t, idx]))])
            for k, pt in enumerate(child[3:]):
                a, bnode = conn[k], conn[(k + 1) % 3]
                ekey = ("e", min(a, bnode), max(a, bnode))
                conn.append(node_at(t, pt, ekey))
            tris_new.append(conn)
            sec_new.append(mesh.sector[t])
    vx = np.asarray(new_xy)
    tris = np.asarray(tris_new, dtype=int)
    sector = np.asarray(sec_new, dtype=int)

    def remap_chain(ids, s_params):
        """Refined crack chain: old vertices and midnodes become vertices;
        new midnodes are looked up through the edge keys."""
        out_ids = []
        out_s = []
        for k in range(len(ids) - 1):
            a = key_to_id[("p", int(ids[k]))]
            bnode = key_to_id[("p", int(ids[k + 1]))]
            ekey = ("e", min(a, bnode), max(a, bnode))
            out_ids.extend([a, key_to_id[ekey]])
            out_s.extend([s_params[k], 0.5 * (s_params[k] + s_params[k + 1])])
        out_ids.append(key_to_id[("p", int(ids[-1]))])
        out_s.append(s_params[-1])
        return np.asarray(out_ids, dtype=int), np.asarray(out_s)

    crack = []
    for rec in mesh.crack:
        p_ids, p_s = remap_chain(rec["plus"], rec["s"])
        m_ids, m_s = remap_chain(rec["minus"], rec["s"])
        crack.append({"s": p_s, "plus": p_ids, "minus": m_ids,
                      "plus_sector": rec.get("plus_sector"),
                      "minus_sector": rec.get("minus_sector")})
    junction = np.array([key_to_id[("p", int(j))] for j in mesh.junction_nodes])
    bdry = []
    for (na, mid, nb, tag, ta, tb) in mesh.bdry:
        a = key_to_id[("p", na)]
        m = key_to_id[("p", mid)]
        bnode = key_to_id[("p", nb)]
        k1 = key_to_id[("e", min(a, m), max(a, m))]
        k2 = key_to_id[("e", min(m, bnode), max(m, bnode))]
        tm = 0.5 * (ta + tb) if abs(tb - ta) < 0.5 else np.mod(0.5 * (ta + tb + 1.0), 1.0)
        bdry.append((a, k1, m, tag, ta, tm))
        bdry.append((m, k2, bnode, tag, tm, tb))
    outer_param = {}
    for (a, m, bnode, tag, ta, tb) in bdry:
        outer_param[a] = ta
        outer_param[bnode] = tb
    out = CrackMesh(vx, tris, sector, n_vertex_new, crack, junction, bdry,
                    outer_param, mesh.h / 2.0)
    if mesh.vertex_mask is not None:
        # masks are geometric; re-derive membership of new nodes from parents
        out.vertex_mask = None
        out.elem_mask = None
        out.mu = mesh.mu
    return out


def prolong(field, fine_mesh):
    """Exact P2 embedding of a field into the refined mesh."""
    coarse = field.mesh
    vals = np.zeros(fine_mesh.n_nodes)
    ref6 = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5)]
    seen = np.zeros(fine_mesh.n_nodes, dtype=bool)
    child_per_parent = 4
    for t in range(coarse.n_tris):
        U = field.values[coarse.tris[t]]
        for c in range(child_per_parent):
            tc = t * child_per_parent + c
            for a in range(6):
                node = fine_mesh.tris[tc, a]
                if seen[node]:
                    continue
                ref = _CHILD_REF[c][a]
                N, _ = p2_basis(*ref)
                vals[node] = N @ U
                seen[node] = True
    return CrackField(fine_mesh, vals)
