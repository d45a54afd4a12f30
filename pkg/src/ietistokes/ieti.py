"""Dual-primal tearing and interconnecting solver for multi-patch Stokes.

Each patch contributes an augmented saddle system with blocks ordered
[u_gamma | u_inner | p | mu_avg | mu_cont]: the Stokes blocks, a multiplier
pinning the patch-average pressure, and multipliers tying the primal values
(velocity corner values at shared vertices and net edge fluxes) to global
coarse unknowns. The remaining interface dofs are coupled through a signed
jump operator B and Lagrange multipliers lambda, leading to

    F lam = g,   F = B_Pi Acoarse^-1 B_Pi^T + sum_k B^k Abar_k^-1 B^k,T

solved by preconditioned conjugate gradients with the scaled Dirichlet
preconditioner. The Lanczos tridiagonal matrix assembled from the CG
coefficients provides the condition number estimate.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_patch, edge_flux_matrix, matched_side_dofs

__all__ = (
    "SingularLocalSystemError",
    "PrimalConstraints",
    "AugmentedLocalSystem",
    "IetiOperator",
    "ScaledDirichletPreconditioner",
    "SolveReport",
    "setup_ieti",
    "solve_pcg",
    "solve_stokes_ieti",
    "verify_supmat",
)


class SingularLocalSystemError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# primal constraints and the jump operator


class PrimalConstraints:
    """Primal dof numbering and per-patch constraint rows.

    Global primal order: two velocity values per shared non-Dirichlet vertex,
    one net flux per interface, one average pressure per patch. Per patch the
    constraint rows are stacked [average | corners | fluxes]; flux rows pick
    up a right-hand-side shift from eliminated Dirichlet dofs on the edge.
    """

    def __init__(self, mp, spaces, systems):
        self.mp = mp
        self.vertices = mp.primal_vertices()
        self.interfaces = sorted(mp.interfaces, key=lambda f: (f.a, f.b, f.side_a))
        self.n_vertex = 2 * len(self.vertices)
        self.flux_offset = self.n_vertex
        self.avg_offset = self.n_vertex + len(self.interfaces)
        self.n_primal = self.avg_offset + mp.n_patches

        self.rows = []      # per patch: sparse (n_loc, n_x)
        self.shifts = []    # per patch: constraint rhs values
        self.globals_ = []  # per patch: global primal index per row
        self.signs = []     # per patch: +-1 weight tying row to its global dof

        vertex_corners = [[] for _ in range(mp.n_patches)]
        for vi, j in enumerate(self.vertices):
            for k, corner in mp.vertices[j].members:
                vertex_corners[k].append((vi, corner))

        for k, ths in enumerate(spaces):
            sysk = systems[k]
            n_g, n_i = ths.n_gamma, ths.n_inner
            n_x = 2 * (n_g + n_i) + ths.n_pressure
            p_off = 2 * (n_g + n_i)
            ri, ci, vals = [], [], []
            shifts, globs, signs = [], [], []
            dirpos = {d: j for j, d in enumerate(ths.dirichlet)}
            nrow = 0

            avg = sysk.pressure_average_row()
            ri.extend([nrow] * len(avg))
            ci.extend((p_off + np.arange(ths.n_pressure)).tolist())
            vals.extend(avg.tolist())
            shifts.append(0.0)
            globs.append(self.avg_offset + k)
            signs.append(1.0)
            nrow += 1

            for vi, corner in vertex_corners[k]:
                dof = ths.vel.corner_dof(*corner)
                for c in (0, 1):
                    ri.append(nrow)
                    ci.append(ths.gamma_pos(c, dof))
                    vals.append(1.0)
                    shifts.append(0.0)
                    globs.append(2 * vi + c)
                    signs.append(1.0)
                    nrow += 1

            for fi, iface in enumerate(self.interfaces):
                if iface.a == k:
                    side, sign = iface.side_a, 1.0
                elif iface.b == k:
                    side, sign = iface.side_b, -1.0
                else:
                    continue
                dofs, R = edge_flux_matrix(mp.patches[k], ths.vel, side)
                shift = 0.0
                for i, dof in enumerate(dofs):
                    for c in (0, 1):
                        if dof in dirpos:
                            shift -= R[i, c] * sysk.dirichlet_values[c, dirpos[dof]]
                        else:
                            ri.append(nrow)
                            ci.append(ths.gamma_pos(c, dof))
                            vals.append(R[i, c])
                shifts.append(shift)
                globs.append(self.flux_offset + fi)
                signs.append(sign)
                nrow += 1

            self.rows.append(sp.coo_matrix((vals, (ri, ci)), shape=(nrow, n_x)).tocsr())
            self.shifts.append(np.array(shifts))
            self.globals_.append(np.array(globs, dtype=int))
            self.signs.append(np.array(signs))

    def n_local(self, k):
        return self.rows[k].shape[0]


def build_jump_operator(constraints, spaces):
    """Signed jump matrices B^(k) over the u_gamma blocks.

    One multiplier row per matched non-corner interface dof pair and
    component: +1 on the lower patch, -1 on the higher. Rows are ordered by
    (patch pair, component, position along the edge).
    """
    mp = constraints.mp
    entries = [([], [], []) for _ in spaces]
    nrow = 0
    for iface in constraints.interfaces:
        da, db = matched_side_dofs(mp, spaces, iface)
        for c in (0, 1):
            for i in range(1, len(da) - 1):
                ra, ca, va = entries[iface.a]
                ra.append(nrow)
                ca.append(spaces[iface.a].gamma_pos(c, da[i]))
                va.append(1.0)
                rb, cb, vb = entries[iface.b]
                rb.append(nrow)
                cb.append(spaces[iface.b].gamma_pos(c, db[i]))
                vb.append(-1.0)
                nrow += 1
    Bs = []
    for k, ths in enumerate(spaces):
        r, c, v = entries[k]
        Bs.append(sp.coo_matrix((v, (r, c)), shape=(nrow, 2 * ths.n_gamma)).tocsr())
    return Bs, nrow


# ---------------------------------------------------------------------------
# local factorizations and the primal basis


class AugmentedLocalSystem:
    """Sparse factorization of one augmented patch matrix.

    The factorization is checked against a random right-hand side; a large
    residual means the constraint set leaves the saddle system singular
    (e.g. a floating patch stripped of its corner and flux rows).
    """

    def __init__(self, system, C, shifts, label=""):
        A3 = system.saddle_matrix()
        self.n_x = A3.shape[0]
        self.n_mu = C.shape[0]
        self.C = C
        self.shifts = shifts
        Abar = sp.bmat([[A3, C.T], [C, None]], format="csc")
        try:
            self.lu = spla.splu(Abar)
        except RuntimeError as err:
            raise SingularLocalSystemError(
                "augmented patch system %s is singular (%d constraint rows): %s"
                % (label, self.n_mu, err)
            )
        rng = np.random.default_rng(7)
        b = rng.standard_normal(Abar.shape[0])
        x = self.lu.solve(b)
        rel = np.linalg.norm(Abar @ x - b) / np.linalg.norm(b)
        if not np.isfinite(rel) or rel > 1e-6:
            raise SingularLocalSystemError(
                "augmented patch system %s is numerically singular "
                "(residual %.2e with %d constraint rows)" % (label, rel, self.n_mu)
            )
        self.A3 = A3

    def solve(self, rhs):
        return self.lu.solve(rhs)

    def solve_x(self, rhs_x, rhs_mu=None):
        """Solve with the given equilibrium/constraint rhs, return the x part."""
        rhs = np.zeros(self.n_x + self.n_mu)
        rhs[: self.n_x] = rhs_x
        if rhs_mu is not None:
            rhs[self.n_x :] = rhs_mu
        return self.lu.solve(rhs)[: self.n_x]


def build_primal_basis(aug, ths, structure_tol=1e-6, check_structure=True):
    """Columns of the local primal basis, one per local constraint.

    Solves the augmented system with unit constraint values. The first
    (averaging) column must have zero velocity blocks and constant pressure;
    this holds exactly when the patch has no Neumann side, up to the
    quadrature error of the divergence matrix on rational geometry.
    """
    n_x, n_mu = aug.n_x, aug.n_mu
    rhs = np.zeros((n_x + n_mu, n_mu))
    rhs[n_x:, :] = np.eye(n_mu)
    X = aug.lu.solve(rhs)
    psi_x = X[:n_x, :]
    psi_mu = X[n_x:, :]

    repro = aug.C @ psi_x - np.eye(n_mu)
    if np.abs(repro).max() > 1e-8:
        raise SingularLocalSystemError(
            "primal basis does not reproduce its constraints (err %.2e)"
            % np.abs(repro).max()
        )
    if check_structure:
        nu = 2 * (ths.n_gamma + ths.n_inner)
        scale = max(1.0, np.abs(psi_x[:, 0]).max())
        vel_err = np.abs(psi_x[:nu, 0]).max() if nu else 0.0
        prs_err = np.abs(psi_x[nu:, 0] - 1.0).max()
        if max(vel_err, prs_err) > structure_tol * scale:
            raise SingularLocalSystemError(
                "averaging basis column lost its structure "
                "(velocity %.2e, pressure %.2e)" % (vel_err, prs_err)
            )
    return psi_x, psi_mu


# ---------------------------------------------------------------------------
# the dual-primal operator


class IetiOperator:
    def __init__(self, mp, spaces, systems, constraints=None,
                 use_global_pressure_mean=True, check_structure=None):
        self.mp = mp
        self.spaces = spaces
        self.systems = systems
        if constraints is None:
            constraints = PrimalConstraints(mp, spaces, systems)
        self.constraints = constraints
        self.use_global_pressure_mean = use_global_pressure_mean

        self.Bs, self.n_lambda = build_jump_operator(constraints, spaces)
        self.locals_ = []
        self.psi_x = []
        self.psi_mu = []
        n_pi = constraints.n_primal
        A_pi = np.zeros((n_pi, n_pi))
        B_pi = np.zeros((self.n_lambda, n_pi))
        b_pi = np.zeros(n_pi)
        for k, ths in enumerate(spaces):
            aug = AugmentedLocalSystem(
                systems[k], constraints.rows[k], constraints.shifts[k],
                label="patch %d" % k,
            )
            check = check_structure
            if check is None:
                check = "neumann" not in ths.side_roles.values()
            px, pm = build_primal_basis(aug, ths, check_structure=check)
            self.locals_.append(aug)
            self.psi_x.append(px)
            self.psi_mu.append(pm)

            G = constraints.globals_[k]
            s = constraints.signs[k]
            contrib = px.T @ (aug.A3 @ px)
            np.add.at(A_pi, (G[:, None], G[None, :]), (s[:, None] * s[None, :]) * contrib)
            bx = systems[k].rhs()
            gloc = px.T @ bx + pm.T @ constraints.shifts[k]
            np.add.at(b_pi, G, s * gloc)
            BG = self.Bs[k] @ px[: 2 * ths.n_gamma, :]
            for j in range(len(G)):
                B_pi[:, G[j]] += s[j] * BG[:, j]
        self.A_pi = A_pi
        self.B_pi = B_pi
        self.b_pi = b_pi

        if use_global_pressure_mean:
            areas = np.array([s.area for s in systems])
            row = np.zeros(n_pi)
            row[constraints.avg_offset :] = areas / areas.sum()
            self.C_pi = row
            coarse = np.zeros((n_pi + 1, n_pi + 1))
            coarse[:n_pi, :n_pi] = A_pi
            coarse[:n_pi, n_pi] = row
            coarse[n_pi, :n_pi] = row
        else:
            self.C_pi = None
            coarse = A_pi
        self._coarse_lu = sla.lu_factor(coarse)
        rng = np.random.default_rng(7)
        b = rng.standard_normal(coarse.shape[0])
        x = sla.lu_solve(self._coarse_lu, b)
        rel = np.linalg.norm(coarse @ x - b) / np.linalg.norm(b)
        if not np.isfinite(rel) or rel > 1e-6:
            raise SingularLocalSystemError(
                "coarse primal system is numerically singular (residual %.2e)" % rel
            )
        self.n_coarse = coarse.shape[0]
        self.n_primal = n_pi

    def coarse_solve(self, rhs_primal):
        rhs = np.zeros(self.n_coarse)
        rhs[: self.n_primal] = rhs_primal
        return sla.lu_solve(self._coarse_lu, rhs)[: self.n_primal]

    def apply_F(self, lam):
        out = self.B_pi @ self.coarse_solve(self.B_pi.T @ lam)
        for k, aug in enumerate(self.locals_):
            ng2 = 2 * self.spaces[k].n_gamma
            t = np.zeros(aug.n_x)
            t[:ng2] = self.Bs[k].T @ lam
            y = aug.solve_x(t)
            out += self.Bs[k] @ y[:ng2]
        return out

    def rhs(self):
        g = self.B_pi @ self.coarse_solve(self.b_pi)
        for k, aug in enumerate(self.locals_):
            ng2 = 2 * self.spaces[k].n_gamma
            y = aug.solve_x(self.systems[k].rhs(), self.constraints.shifts[k])
            g += self.Bs[k] @ y[:ng2]
        return g

    def recover(self, lam):
        """Per-patch velocity and pressure coefficients (Dirichlet re-added)."""
        x_pi = self.coarse_solve(self.b_pi - self.B_pi.T @ lam)
        us, ps = [], []
        for k, aug in enumerate(self.locals_):
            ths = self.spaces[k]
            ng2, ni2 = 2 * ths.n_gamma, 2 * ths.n_inner
            t = self.systems[k].rhs()
            t[:ng2] -= self.Bs[k].T @ lam
            x = aug.solve_x(t, self.constraints.shifts[k])
            G, s = self.constraints.globals_[k], self.constraints.signs[k]
            x = x + self.psi_x[k] @ (s * x_pi[G])
            us.append(self.systems[k].expand(x[:ng2], x[ng2 : ng2 + ni2]))
            ps.append(x[ng2 + ni2 :])
        return us, ps, x_pi


class ScaledDirichletPreconditioner:
    """M_sD = sum_k B^k D^-1 S_K^k D^-1 B^k,T with D = 2 I.

    S_K is the velocity Schur complement on the interface block, applied
    through one interior Poisson solve per component; pressure never enters.
    """

    def __init__(self, spaces, systems, Bs):
        self.spaces = spaces
        self.Bs = Bs
        self.blocks = []
        for ths, sysk in zip(spaces, systems):
            g, i = ths.gamma, ths.inner
            Ks = sysk.Ks.tocsr()
            Kgg = Ks[g][:, g].tocsr()
            Kgi = Ks[g][:, i].tocsr()
            lu_ii = spla.splu(Ks[i][:, i].tocsc()) if len(i) else None
            self.blocks.append((Kgg, Kgi, lu_ii))

    def apply(self, lam):
        out = np.zeros_like(lam)
        for k, ths in enumerate(self.spaces):
            ng = ths.n_gamma
            if ng == 0:
                continue
            v = 0.5 * (self.Bs[k].T @ lam)
            Kgg, Kgi, lu_ii = self.blocks[k]
            w = np.empty_like(v)
            for c in (0, 1):
                vc = v[c * ng : (c + 1) * ng]
                wc = Kgg @ vc
                if lu_ii is not None:
                    wc -= Kgi @ lu_ii.solve(Kgi.T @ vc)
                w[c * ng : (c + 1) * ng] = wc
            out += self.Bs[k] @ (0.5 * w)
        return out


# ---------------------------------------------------------------------------
# conjugate gradients with Lanczos condition estimate


class SolveReport:
    def __init__(self, iterations, residuals, converged, eig_min, eig_max, kappa,
                 timings=None):
        self.iterations = iterations
        self.residuals = residuals
        self.converged = converged
        self.eig_min = eig_min
        self.eig_max = eig_max
        self.kappa = kappa
        self.timings = timings or {}

    def __repr__(self):
        return "SolveReport(it=%d, converged=%s, kappa=%.3g)" % (
            self.iterations, self.converged, self.kappa)


def _lanczos_estimate(alphas, betas):
    m = len(alphas)
    if m == 0:
        return 1.0, 1.0, 1.0
    diag = np.empty(m)
    off = np.empty(max(m - 1, 0))
    for j in range(m):
        diag[j] = 1.0 / alphas[j]
        if j > 0:
            diag[j] += betas[j - 1] / alphas[j - 1]
        if j < m - 1:
            off[j] = np.sqrt(betas[j]) / alphas[j]
    if m == 1:
        return diag[0], diag[0], 1.0
    ev = sla.eigh_tridiagonal(diag, off, eigvals_only=True)
    emin, emax = float(ev[0]), float(ev[-1])
    return emin, emax, emax / emin


def solve_pcg(apply_op, apply_prec, g, tol=1e-6, max_iter=500, seed=42):
    """Preconditioned CG for F lam = g with a random seeded initial guess.

    Stops when the Euclidean residual norm drops below tol times the initial
    one. The condition number estimate comes from the eigenvalues of the
    Lanczos tridiagonal matrix built from the CG coefficients.
    """
    g = np.asarray(g, dtype=float)
    if not np.any(g):
        return np.zeros(len(g)), SolveReport(0, [0.0], True, 1.0, 1.0, 1.0)
    rng = np.random.default_rng(seed)
    lam = rng.uniform(-1.0, 1.0, size=len(g))
    r = g - apply_op(lam)
    r0 = np.linalg.norm(r)
    residuals = [r0]
    if r0 == 0.0:
        return lam, SolveReport(0, residuals, True, 1.0, 1.0, 1.0)
    z = apply_prec(r)
    p = z.copy()
    rz = r @ z
    alphas, betas = [], []
    converged = False
    for _ in range(max_iter):
        q = apply_op(p)
        alpha = rz / (p @ q)
        alphas.append(alpha)
        lam += alpha * p
        r -= alpha * q
        res = np.linalg.norm(r)
        residuals.append(res)
        if res <= tol * r0:
            converged = True
            break
        z = apply_prec(r)
        rz_new = r @ z
        beta = rz_new / rz
        betas.append(beta)
        p = z + beta * p
        rz = rz_new
    emin, emax, kappa = _lanczos_estimate(alphas, betas[: len(alphas) - 1])
    return lam, SolveReport(len(alphas), residuals, converged, emin, emax, kappa)


# ---------------------------------------------------------------------------
# drivers


def setup_ieti(mp, spaces, rhs=None, dirichlet=None, use_global_pressure_mean=True,
               nquad=None, systems=None):
    if systems is None:
        systems = [
            assemble_patch(mp.patches[k], spaces[k], rhs, dirichlet, nquad)
            for k in range(mp.n_patches)
        ]
    op = IetiOperator(mp, spaces, systems,
                      use_global_pressure_mean=use_global_pressure_mean)
    pc = ScaledDirichletPreconditioner(spaces, systems, op.Bs)
    return op, pc


def solve_stokes_ieti(mp, spaces, rhs=None, dirichlet=None,
                      use_global_pressure_mean=True, tol=1e-6, max_iter=500,
                      seed=42, nquad=None, systems=None):
    """Assemble, solve the multiplier system, recover patch solutions."""
    op, pc = setup_ieti(mp, spaces, rhs, dirichlet, use_global_pressure_mean,
                        nquad, systems)
    g = op.rhs()
    lam, report = solve_pcg(op.apply_F, pc.apply, g, tol=tol, max_iter=max_iter,
                            seed=seed)
    us, ps, _ = op.recover(lam)
    return us, ps, report


# ---------------------------------------------------------------------------
# sup-representation identities (brute-force verification)


def _brute_sup_matrix(A, B, Z):
    """B Z (Z^T A Z)^-1 Z^T B^T: the Gram matrix of the supremum over span(Z)."""
    if Z.shape[1] == 0:
        return np.zeros((B.shape[0], B.shape[0]))
    AZ = Z.T @ A @ Z
    return B @ Z @ np.linalg.solve(AZ, Z.T @ B.T)


def verify_supmat(seed=0, instances=50, nmax=8, tol=1e-8):
    """Check the three sup representations on random block systems.

    M0 = B A^-1 B^T equals the supremum Gram matrix over the whole space;
    M1 (one constraint block C) the supremum over ker C; M2 (saddle-coupled
    constraint blocks C, D) the supremum over the set of w with C w
    orthogonal to ker D. Returns a dict with the largest relative error.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < instances:
        n = int(rng.integers(2, nmax + 1))
        m1 = int(rng.integers(1, n + 1))
        m2 = int(rng.integers(1, n))
        m3 = int(rng.integers(0, m2 + 1))
        G = rng.standard_normal((n, n))
        A = G @ G.T + n * np.eye(n)
        B = rng.standard_normal((m1, n))
        C = rng.standard_normal((m2, n))
        D = rng.standard_normal((m3, m2))

        M0 = B @ np.linalg.solve(A, B.T)
        err = _rel(M0, _brute_sup_matrix(A, B, np.eye(n)))

        S1 = np.block([[A, C.T], [C, np.zeros((m2, m2))]])
        if np.linalg.cond(S1) > 1e12:
            continue
        M1 = B @ np.linalg.solve(S1, np.vstack([B.T, np.zeros((m2, m1))]))[:n]
        err = max(err, _rel(M1, _brute_sup_matrix(A, B, sla.null_space(C))))

        S2 = np.block([
            [A, C.T, np.zeros((n, m3))],
            [C, np.zeros((m2, m2)), D.T],
            [np.zeros((m3, n)), D, np.zeros((m3, m3))],
        ])
        if np.linalg.cond(S2) > 1e12:
            continue
        M2 = B @ np.linalg.solve(S2, np.vstack([B.T, np.zeros((m2 + m3, m1))]))[:n]
        N = sla.null_space(D) if m3 else np.eye(m2)
        Z2 = sla.null_space(N.T @ C) if N.shape[1] else np.eye(n)
        err = max(err, _rel(M2, _brute_sup_matrix(A, B, Z2)))

        # a square invertible D makes the kernel implication vacuous, so the
        # constrained representation collapses back to the unconstrained one
        if m3 == m2 and np.linalg.cond(D) < 1e10:
            err = max(err, _rel(M2, M0))

        worst = max(worst, err)
        done += 1
    return {"instances": done, "max_rel_err": worst, "ok": bool(worst <= tol)}


def _rel(X, Y):
    scale = max(np.abs(X).max(), np.abs(Y).max(), 1e-30)
    return float(np.abs(X - Y).max() / scale)
