"""Discrete stability analysis: the quadratic-form eigenproblem on the
junction function space, strict-stability verdicts, the tubular-neighborhood
criterion and the necessity/continuity probes."""

import logging
import numpy as np
import scipy.linalg as sla

from .errors import SolveError, ConfigError
from .curves import gauss_legendre, ParamCurve
from .config import transported_config
from .crackmesh import mark_admissible_subdomain
from .fem import (Operator, CrackField, CrackLoadAssembler, _h1u_pins,
                  solve_transported, solve_equilibrium)
from .hspace import JunctionScalar, junction_basis, combine
from .variation import quadratic_form, is_critical, ms_energy

log = logging.getLogger("trijunction.stability")


class StabilityReport:
    def __init__(self, Q, G, eigvals, eigvecs, verdict, margin, basis_n):
        self.Q = Q
        self.G = G
        self.eigvals = eigvals
        self.eigvecs = eigvecs
        self.lam_min = float(eigvals[0])
        self.verdict = verdict
        self.margin = margin
        self.basis_n = basis_n

    @property
    def coercivity_constant(self):
        return self.lam_min

    def eigvec_min(self):
        return self.eigvecs[:, 0]

    def text(self):
        lines = ["stability report (basis n=%d, dim %d)" % (self.basis_n, self.Q.shape[0]),
                 "  lambda_min          % .10e" % self.lam_min,
                 "  verdict             %s" % self.verdict,
                 "  margin              % .3e" % self.margin,
                 "  lowest eigenvalues  " + " ".join("% .6e" % v for v in self.eigvals[:6])]
        return "\n".join(lines)

    def rows(self):
        return [("lambda_%02d" % k, float(v)) for k, v in enumerate(self.eigvals[:12])]

    def dump_matrices(self, stream):
        for name, M in (("Q", self.Q), ("G", self.G)):
            stream.write("# %s %d %d\n" % (name, M.shape[0], M.shape[1]))
            for i in range(M.shape[0]):
                for j in range(M.shape[1]):
                    if M[i, j] != 0.0:
                        stream.write("%d %d %.17g\n" % (i, j, M[i, j]))


# ----------------------------------------------------------------------
# assembly
# ----------------------------------------------------------------------

def _arm_1d_matrices(arm, n):
    """P1 stiffness, mass and H^2-weighted mass on one arm (arc measure)."""
    L = arm.length
    xg, wg = gauss_legendre(6)
    cells = np.linspace(0.0, 1.0, n)
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    W = np.zeros((n, n))
    for k in range(n - 1):
        s0, s1 = cells[k], cells[k + 1]
        s = s0 + xg * (s1 - s0)
        w = wg * (s1 - s0)
        speed = np.linalg.norm(arm.velocity(s), axis=-1)
        N = np.stack([(s1 - s) / (s1 - s0), (s - s0) / (s1 - s0)], axis=1)
        dN = np.array([-1.0, 1.0]) / (s1 - s0)
        H2 = arm.curvature(s) ** 2
        idx = (k, k + 1)
        for a in range(2):
            for b in range(2):
                K[idx[a], idx[b]] += np.sum(w * speed * dN[a] * dN[b] / speed ** 2)
                M[idx[a], idx[b]] += np.sum(w * speed * N[:, a] * N[:, b])
                W[idx[a], idx[b]] += np.sum(w * speed * H2 * N[:, a] * N[:, b])
    return K, M, W


def _basis_matrix(basis, n):
    """Columns = nodal coordinates of basis elements in the 3n 'full' space."""
    P = np.zeros((3 * n, len(basis)))
    for j, b in enumerate(basis):
        for arm in range(3):
            P[arm * n:(arm + 1) * n, j] = b.nodal[arm]
    return P


def assemble_stability_problem(config, u, basis, curves=None, mesh=None,
                               endpoint_policy="auto"):
    """(Q, G) for the polarized quadratic form on the given basis.

    Q = -2 V^T A V + 1D(stiffness + H^2 mass) - boundary point terms;
    G = 1D (mass + stiffness), both reduced to the constrained basis.
    """
    arms = curves if curves is not None else config.arms
    mesh = mesh if mesh is not None else u.mesh
    n = basis[0].nodal[0].size
    nb = len(basis)
    op = mesh._operator if hasattr(mesh, "_operator") else Operator(mesh)
    mesh._operator = op

    assembler = CrackLoadAssembler(mesh, u, arms, endpoint_policy=endpoint_policy)
    B = np.empty((mesh.n_nodes, nb))
    for j, phi in enumerate(basis):
        B[:, j] = assembler.rhs(lambda arm_idx, s, pos: phi.eval(arm_idx, s))
    pinned = _h1u_pins(mesh)
    V = op.solve_pinned(pinned, np.zeros((pinned.size, nb)), B)
    E = V.T @ (op.A @ V)                      # int grad v_i . grad v_j
    E = 0.5 * (E + E.T)

    Kf = np.zeros((3 * n, 3 * n))
    Mf = np.zeros((3 * n, 3 * n))
    Wf = np.zeros((3 * n, 3 * n))
    for arm in range(3):
        K, M, W = _arm_1d_matrices(arms[arm], n)
        sl = slice(arm * n, (arm + 1) * n)
        Kf[sl, sl] = K
        Mf[sl, sl] = M
        Wf[sl, sl] = W
    P = _basis_matrix(basis, n)
    Q1 = P.T @ (Kf + Wf) @ P
    G = P.T @ (Kf + Mf) @ P
    # boundary point terms -phi_i(x_i)^2 Dnu[nu,nu](x_i)
    end_rows = np.zeros((3, 3 * n))
    for arm in range(3):
        end_rows[arm, arm * n + n - 1] = 1.0
    Epts = end_rows @ P                       # endpoint values of basis elements
    Kpt = np.array([config.contact_normal_curvature(i) for i in range(3)])
    Qpt = -(Epts.T * Kpt) @ Epts
    Q = -2.0 * E + Q1 + Qpt
    Q = 0.5 * (Q + Q.T)
    G = 0.5 * (G + G.T)
    extras = {"E": E, "operator": op, "assembler": assembler, "V": V, "P": P}
    return Q, G, extras


def stability_verdict(Q, G, margin_rel=1e-6, basis_n=None):
    """Solve Q v = lambda G v; verdict from the sign of lambda_min."""
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise SolveError("Gram matrix not positive definite (assembly bug)")
    if np.max(np.abs(Q - Q.T)) > 1e-10 * max(1.0, np.abs(Q).max()):
        raise SolveError("stability matrix not symmetric")
    w, v = sla.eigh(Q, G)
    margin = margin_rel * np.linalg.norm(Q, 2)
    if w[0] > margin:
        verdict = "strictly-stable"
    elif w[0] < -margin:
        verdict = "unstable"
    else:
        verdict = "marginal"
    return StabilityReport(Q, G, w, v, verdict, margin,
                           basis_n if basis_n is not None else (Q.shape[0] + 1) // 3)


def analyze_stability(config, u, n=48, curves=None, mesh=None):
    basis = junction_basis(config, n)
    Q, G, extras = assemble_stability_problem(config, u, basis, curves, mesh)
    rep = stability_verdict(Q, G, basis_n=n)
    rep.basis = basis
    rep.extras = extras
    return rep


# ----------------------------------------------------------------------
# independent dense 1D oracle (finite differences, constrained junction)
# ----------------------------------------------------------------------

def oracle_1d(config, m=1500, include_curvature=True):
    """Dense finite-difference eigenvalue of the 1D reduction of the form
    (valid when the nonlocal v_phi term vanishes, e.g. piecewise-constant u).

    Independent of the P1 assembly path: second-order finite differences on
    per-arm arc-length grids, junction constraint eliminated by null-space
    parametrization, dense symmetric eigensolve.
    """
    Ls = [arm.length for arm in config.arms]
    Ks = [config.contact_normal_curvature(i) for i in range(3)]
    nvar = 3 * m
    Q = np.zeros((nvar, nvar))
    G = np.zeros((nvar, nvar))
    for arm in range(3):
        L = Ls[arm]
        dx = L / (m - 1)
        sl = slice(arm * m, (arm + 1) * m)
        D = np.zeros((m - 1, m))
        for k in range(m - 1):
            D[k, k] = -1.0 / dx
            D[k, k + 1] = 1.0 / dx
        stiff = D.T @ D * dx
        trap = np.full(m, dx)
        trap[0] = trap[-1] = dx / 2
        mass = np.diag(trap)
        Qa = stiff.copy()
        if include_curvature:
            s = np.linspace(0.0, 1.0, m)
            H2 = config.arms[arm].curvature(s) ** 2
            Qa += np.diag(trap * H2)
        Qa[-1, -1] -= Ks[arm]
        Q[sl, sl] = Qa
        G[sl, sl] = stiff + mass
    # junction constraint: phi1(0)+phi2(0)+phi3(0)=0
    j_ids = [0, m, 2 * m]
    keep = np.setdiff1d(np.arange(nvar), j_ids)
    T = np.zeros((nvar, nvar - 1))
    T[keep, np.arange(2, nvar - 1)] = 1.0
    T[j_ids[0], 0] = 1.0 / np.sqrt(2)
    T[j_ids[1], 0] = -1.0 / np.sqrt(2)
    T[j_ids[0], 1] = 1.0 / np.sqrt(6)
    T[j_ids[1], 1] = 1.0 / np.sqrt(6)
    T[j_ids[2], 1] = -2.0 / np.sqrt(6)
    Qr = T.T @ Q @ T
    Gr = T.T @ G @ T
    w = sla.eigh(Qr, Gr, eigvals_only=True, subset_by_index=[0, 5])
    return w


def oracle_quadrature_value(config, fns, panels=None):
    """High-order quadrature of the local form for callable phi (v_phi = 0).

    fns: three (phi(s), phi'(s)) pairs of callables on [0, 1]; panels may be
    given (e.g. aligned with the kinks of a piecewise-linear phi).
    """
    xg, wg = gauss_legendre(10)
    total = 0.0
    pan = np.linspace(0.0, 1.0, 400) if panels is None else np.asarray(panels)
    for i, arm in enumerate(config.arms):
        phi, dphi = fns[i]
        s = (pan[:-1, None] + np.diff(pan)[:, None] * xg[None, :]).ravel()
        w = (np.diff(pan)[:, None] * wg[None, :]).ravel()
        speed = np.linalg.norm(arm.velocity(s), axis=-1)
        total += np.sum((np.asarray(dphi(s)) / speed) ** 2 * w * speed)
        total += np.sum(arm.curvature(s) ** 2 * np.asarray(phi(s)) ** 2 * w * speed)
        total -= float(phi(np.array([1.0]))[0]) ** 2 * config.contact_normal_curvature(i)
    return float(total)


# ----------------------------------------------------------------------
# tubular-neighborhood criterion
# ----------------------------------------------------------------------

def tubular_stability_check(config, u, mesh, mu_ladder=(0.2, 0.1, 0.05), n=32,
                            crit_tol=(1e-3, 1e-3, 1e-3)):
    """Sign gate H_bdry(x_i) < 0 plus the mu-ladder decay of the nonlocal
    energy supremum; holds when both pass and lambda_min at the smallest mu
    is positive."""
    ok, crit = is_critical(config, u, crit_tol)
    if not ok:
        raise ConfigError("tubular check requires a critical configuration "
                          "(residuals %s)" % (crit,))
    signs = [config.contact_normal_curvature(i) for i in range(3)]
    sign_gate = all(k < 0 for k in signs)
    basis = junction_basis(config, n)
    sups = []
    lam_small = None
    for mu in sorted(mu_ladder, reverse=True):
        mesh_mu = mark_admissible_subdomain(mesh, config, mu)
        Q, G, extras = assemble_stability_problem(config, u, basis, mesh=mesh_mu)
        Emat = extras["E"]
        wE = sla.eigh(0.5 * (Emat + Emat.T), G, eigvals_only=True)
        sups.append(float(max(wE[-1], 0.0)))
        lam_small = stability_verdict(Q, G, basis_n=n)
    monotone = all(sups[k + 1] <= sups[k] + 1e-10 * (1 + abs(sups[k]))
                   for k in range(len(sups) - 1))
    holds = bool(sign_gate and lam_small.lam_min > 0)
    return {"holds": holds, "sign_gate": sign_gate, "boundary_terms": signs,
            "mu_ladder": sorted(mu_ladder, reverse=True), "sup_vphi_energy": sups,
            "monotone": monotone, "lambda_min_smallest_mu": lam_small.lam_min,
            "verdict_smallest_mu": lam_small.verdict, "criticality": crit}


# ----------------------------------------------------------------------
# necessity of nonnegativity (contrapositive probe)
# ----------------------------------------------------------------------

def necessity_probe(config, u, mesh, n=32, n_random=20, seed=0, t_descent=1e-2,
                    descent_check=True):
    """Sample the quadratic form; if a negative direction exists, verify it
    is a genuine energy-descent direction by flowing the configuration."""
    rng = np.random.default_rng(seed)
    basis = junction_basis(config, n)
    Q, G, extras = assemble_stability_problem(config, u, basis)
    rep = stability_verdict(Q, G, basis_n=n)
    vals = list(np.diag(Q))
    for _ in range(n_random):
        c = rng.standard_normal(len(basis))
        c /= np.linalg.norm(c)
        vals.append(float(c @ Q @ c))
    scale = max(abs(v) for v in vals)
    tol_neg = 1e-6 * scale
    negative = [v for v in vals if v < -tol_neg]
    out = {"lambda_min": rep.lam_min, "verdict": rep.verdict,
           "sampled_min": min(vals), "tol_neg": tol_neg,
           "has_negative": bool(negative) or rep.lam_min < -tol_neg}
    if out["has_negative"] and descent_check:
        from .flows import build_test_field, descent_energy_delta
        phi_min = combine(basis, rep.eigvec_min())
        nrm = np.sqrt(phi_min.norm_h1(config))
        phi_min = phi_min.scaled(1.0 / nrm)
        V = build_test_field(config, phi_min)
        delta = descent_energy_delta(config, u, mesh, V, t_descent)
        out["descent_delta"] = delta
        out["descent_found"] = bool(delta < 0.0)
    return out


# ----------------------------------------------------------------------
# uniform coercivity probe along configurations converging to the base one
# ----------------------------------------------------------------------

def coercivity_continuity_probe(config, u, mesh, fields_and_amplitudes, n=32,
                                dirichlet_data=None):
    """lambda_min along a sequence of transported configurations Phi_n -> Id.

    fields_and_amplitudes: list of (VectorField, amplitude); each entry is
    flowed to time 1 to produce Phi_n.  Returns the per-entry records and
    the base eigenvalue.
    """
    from .fields import rk4_flow
    base = analyze_stability(config, u, n=n)
    records = []
    for X, amp in fields_and_amplitudes:
        Xa = X * amp
        mesh_a = mesh.morph(lambda P: rk4_flow(Xa, P, 1.0))
        cfg_a = transported_config(config, lambda P: rk4_flow(Xa, P, 1.0))
        u_a = solve_transported(config, mesh_a, u)
        rep_a = analyze_stability(cfg_a, u_a, n=n, mesh=mesh_a)
        # closeness of Phi to Id in C^2 measured on Gamma samples
        from .flows import c2_distance_on_crack
        dist = c2_distance_on_crack(config, lambda P: rk4_flow(Xa, P, 1.0))
        # trace-gradient convergence probe
        sup_grad = 0.0
        ss = np.linspace(0.02, 0.98, 160)
        for i in range(3):
            tp0 = u.trace(i, "plus")
            tpa = u_a.trace(i, "plus")
            base_pos = config.arms[i].point(ss)
            img = rk4_flow(Xa, base_pos, 1.0)
            s_img, _, _ = cfg_a.arms[i].project(img)
            # d(u_a o Phi)/darc_base = du_a/darc_img * darc_img/darc_base
            eps = 1e-5
            img2 = rk4_flow(Xa, config.arms[i].point(ss + eps), 1.0)
            darc_ratio = (np.linalg.norm(img2 - img, axis=1)
                          / np.linalg.norm(config.arms[i].point(ss + eps) - base_pos, axis=1))
            pullback = tpa.darc(s_img) * darc_ratio
            sup_grad = max(sup_grad, float(np.max(np.abs(pullback - tp0.darc(ss)))))
        records.append({"amplitude": amp, "lambda_min": rep_a.lam_min,
                        "verdict": rep_a.verdict, "c2_dist": dist,
                        "trace_grad_sup": sup_grad})
    return {"lambda_min_base": base.lam_min, "records": records}
