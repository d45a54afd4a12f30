import numpy as np
import pytest
import scipy.sparse as sp

from ietistokes.assembly import (
    assemble_global,
    assemble_patch,
    build_taylor_hood,
    manufactured_rhs,
    manufactured_velocity,
    taylor_hood_spaces,
)
from ietistokes.domains import build_domain
from ietistokes.geometry import bilinear_patch, build_multipatch
from ietistokes.ieti import (
    AugmentedLocalSystem,
    IetiOperator,
    PrimalConstraints,
    ScaledDirichletPreconditioner,
    SingularLocalSystemError,
    setup_ieti,
    solve_pcg,
    solve_stokes_ieti,
    verify_supmat,
)


def build_grid_problem(m, n, degree=1, refinement=1, rhs=manufactured_rhs,
                       dirichlet=manufactured_velocity):
    mp = build_domain("grid", m=m, n=n)
    spaces = taylor_hood_spaces(mp, degree=degree, refinement=refinement)
    glob = assemble_global(mp, spaces, rhs=rhs, dirichlet=dirichlet)
    return mp, spaces, glob


def test_primal_counts_interior_patch():
    # the center patch of a 3x3 grid floats: 4 shared vertices x 2 components
    # plus 4 edge fluxes gives 12 continuity rows, plus the averaging row
    mp, spaces, glob = build_grid_problem(3, 3)
    cons = PrimalConstraints(mp, spaces, glob.systems)
    center = 4
    assert spaces[center].side_roles == {s: "interface" for s in
                                         ("west", "east", "south", "north")}
    assert cons.n_local(center) == 13
    # global count: vertices, fluxes, averages
    assert cons.n_primal == 2 * 4 + 12 + 9


def test_corner_row_is_interpolatory():
    mp, spaces, glob = build_grid_problem(2, 2)
    cons = PrimalConstraints(mp, spaces, glob.systems)
    k = 0
    ths = spaces[k]
    dof = ths.vel.corner_dof(1, 1)  # the shared center vertex
    C = cons.rows[k].toarray()
    for c in (0, 1):
        e = np.zeros(C.shape[1])
        e[ths.gamma_pos(c, dof)] = 1.0
        vals = C @ e
        hit = np.flatnonzero(np.abs(vals) > 1e-14)
        # exactly one corner row sees this dof with weight 1; flux rows of the
        # adjacent edges also integrate it
        corner_rows = [r for r in hit if abs(vals[r] - 1.0) < 1e-14]
        assert len(corner_rows) == 1


def test_flux_row_with_dirichlet_shift_gives_total_flux():
    # row value on free dofs plus the recorded shift reproduces the flux of
    # the full field u = (1, 0), here through the interface edge x = 1
    mp = build_domain("grid", m=2, n=1)
    spaces = taylor_hood_spaces(mp, degree=1, refinement=1)

    def g(pts):
        out = np.zeros(pts.shape)
        out[..., 0] = 1.0
        return out

    systems = [assemble_patch(mp.patches[k], spaces[k], dirichlet=g) for k in (0, 1)]
    cons = PrimalConstraints(mp, spaces, systems)
    k = 0
    ths = spaces[k]
    row = cons.n_local(k) - 1  # [avg | fluxes], no primal vertices here
    u_free = np.zeros(cons.rows[k].shape[1])
    for d in ths.gamma:
        u_free[ths.gamma_pos(0, d)] = 1.0
    total = cons.rows[k][row] @ u_free - cons.shifts[k][row]
    assert abs(total - 1.0) < 1e-12


def test_primal_basis_structure_affine():
    mp, spaces, glob = build_grid_problem(2, 2)
    op = IetiOperator(mp, spaces, glob.systems)
    for k, ths in enumerate(spaces):
        C = op.constraints.rows[k].toarray()
        psi = op.psi_x[k]
        assert np.abs(C @ psi - np.eye(C.shape[0])).max() < 1e-10
        # averaging column: velocity identically zero, pressure constant one
        nu = 2 * (ths.n_gamma + ths.n_inner)
        assert np.abs(psi[:nu, 0]).max() < 1e-10
        assert np.abs(psi[nu:, 0] - 1.0).max() < 1e-10


def test_jump_operator_shape_and_identity():
    mp, spaces, glob = build_grid_problem(2, 2)
    op = IetiOperator(mp, spaces, glob.systems)
    # 4 interfaces, 3 non-corner dofs each, 2 components
    assert op.n_lambda == 24
    Bg = sp.hstack(op.Bs).tocsr()
    # each row: one +1 and one -1
    assert np.abs(Bg @ np.ones(Bg.shape[1])).max() < 1e-14
    assert (abs(Bg) @ np.ones(Bg.shape[1]) == 2).all()
    # B D^-1 B^T B = B with D = 2 I
    rng = np.random.default_rng(2)
    for _ in range(100):
        v = rng.standard_normal(Bg.shape[1])
        lhs = Bg @ (0.5 * (Bg.T @ (Bg @ v)))
        assert np.abs(lhs - Bg @ v).max() < 1e-12


def test_jump_representation_and_antisymmetry():
    # w = D^-1 B^T B v carries the inter-patch difference: w_a - w_b = v_a - v_b
    # on every matched non-corner pair, and w_a = -w_b
    mp, spaces, glob = build_grid_problem(2, 2, degree=2)
    op = IetiOperator(mp, spaces, glob.systems)
    rng = np.random.default_rng(4)
    vs = [rng.standard_normal(2 * t.n_gamma) for t in spaces]
    jump = np.zeros(op.n_lambda)
    for k in range(4):
        jump += op.Bs[k] @ vs[k]
    ws = [0.5 * (op.Bs[k].T @ jump) for k in range(4)]
    from ietistokes.assembly import matched_side_dofs

    for iface in op.constraints.interfaces:
        da, db = matched_side_dofs(mp, spaces, iface)
        for c in (0, 1):
            for i in range(1, len(da) - 1):
                pa = spaces[iface.a].gamma_pos(c, da[i])
                pb = spaces[iface.b].gamma_pos(c, db[i])
                diff = vs[iface.a][pa] - vs[iface.b][pb]
                assert abs((ws[iface.a][pa] - ws[iface.b][pb]) - diff) < 1e-12
                assert abs(ws[iface.a][pa] + ws[iface.b][pb]) < 1e-12


def test_scaled_jumps_stay_in_constrained_space():
    # corner entries of D^-1 B^T B v vanish by construction, and when v is
    # primally conforming (shared corner values, matching edge fluxes) the
    # flux rows applied to the result vanish too
    mp, spaces, glob = build_grid_problem(2, 2, degree=2)
    op = IetiOperator(mp, spaces, glob.systems)
    cons = op.constraints
    rng = np.random.default_rng(9)
    vs = [rng.standard_normal(2 * t.n_gamma) for t in spaces]
    for j in cons.vertices:
        for c in (0, 1):
            val = rng.standard_normal()
            for k, corner in mp.vertices[j].members:
                dof = spaces[k].vel.corner_dof(*corner)
                vs[k][spaces[k].gamma_pos(c, dof)] = val
    # match the fluxes: project the mismatch out of the non-corner part of
    # the second patch's flux functional so corner values stay shared
    for fi, iface in enumerate(cons.interfaces):
        rows = []
        for k in (iface.a, iface.b):
            j = int(np.flatnonzero(cons.globals_[k] == cons.flux_offset + fi)[0])
            r = np.asarray(cons.rows[k][j].todense()).ravel()
            rows.append(r[: 2 * spaces[k].n_gamma])
        b = iface.b
        direction = rows[1].copy()
        for dof in spaces[b].vel.corner_dofs().values():
            if dof in spaces[b]._gamma_pos:
                for c in (0, 1):
                    direction[spaces[b].gamma_pos(c, dof)] = 0.0
        # opposite outward normals: continuity means the two fluxes cancel
        mism = rows[0] @ vs[iface.a] + rows[1] @ vs[b]
        vs[b] -= mism * direction / (rows[1] @ direction)
    jump = np.zeros(op.n_lambda)
    for k in range(4):
        jump += op.Bs[k] @ vs[k]
    for k, ths in enumerate(spaces):
        w = 0.5 * (op.Bs[k].T @ jump)
        for dof in ths.vel.corner_dofs().values():
            if dof in ths._gamma_pos:
                for c in (0, 1):
                    assert w[ths.gamma_pos(c, dof)] == 0.0
        C = cons.rows[k]
        fluxrows = [j for j in range(cons.n_local(k))
                    if cons.flux_offset <= cons.globals_[k][j] < cons.avg_offset]
        wx = np.zeros(C.shape[1])
        wx[: 2 * ths.n_gamma] = w
        for j in fluxrows:
            assert abs(C[j] @ wx) < 1e-10


def test_F_symmetric_positive_semidefinite():
    mp, spaces, glob = build_grid_problem(2, 2)
    op = IetiOperator(mp, spaces, glob.systems)
    rng = np.random.default_rng(6)
    scale = 0.0
    for _ in range(20):
        l1 = rng.standard_normal(op.n_lambda)
        l2 = rng.standard_normal(op.n_lambda)
        f1, f2 = op.apply_F(l1), op.apply_F(l2)
        scale = max(scale, np.linalg.norm(f1) / np.linalg.norm(l1))
        s12, s21 = f1 @ l2, l1 @ f2
        assert abs(s12 - s21) < 1e-10 * max(1.0, abs(s12))
        assert l1 @ f1 >= -1e-10 * scale * (l1 @ l1)


def test_rhs_antisymmetric_under_patch_relabeling():
    # swapping the two patches of a strip flips the sign convention of every
    # multiplier row, so g flips sign
    mp = build_domain("grid", m=2, n=1)
    mp_sw = build_multipatch([mp.patches[1], mp.patches[0]])
    gs = []
    for m in (mp, mp_sw):
        spaces = taylor_hood_spaces(m, degree=1, refinement=1)
        op, pc = setup_ieti(m, spaces, rhs=manufactured_rhs,
                            dirichlet=manufactured_velocity)
        gs.append(op.rhs())
    assert np.abs(gs[0] + gs[1]).max() < 1e-10 * max(1.0, np.abs(gs[0]).max())


def relative_difference(glob, us, ps, us_ref, ps_ref):
    eh = rh = ep = rp = 0.0
    for k in range(len(us)):
        Ks, Mp = glob.systems[k].Ks, glob.systems[k].Mp
        for c in (0, 1):
            d = us[k][c] - us_ref[k][c]
            eh += d @ (Ks @ d)
            rh += us_ref[k][c] @ (Ks @ us_ref[k][c])
        dp = ps[k] - ps_ref[k]
        ep += dp @ (Mp @ dp)
        rp += ps_ref[k] @ (Mp @ ps_ref[k])
    return np.sqrt(eh / rh), np.sqrt(ep / rp)


def test_ieti_matches_monolithic_dirichlet():
    mp, spaces, glob = build_grid_problem(2, 2)
    us_ref, ps_ref = glob.solve()
    us, ps, rep = solve_stokes_ieti(mp, spaces, rhs=manufactured_rhs,
                                    dirichlet=manufactured_velocity,
                                    tol=1e-10, systems=glob.systems)
    assert rep.converged
    du, dp = relative_difference(glob, us, ps, us_ref, ps_ref)
    assert du < 1e-8
    assert dp < 1e-8


def test_ieti_matches_monolithic_neumann_outlet():
    mp0 = build_domain("grid", m=2, n=1)
    tags = {(k, s): "dirichlet" for k in (0, 1)
            for s in ("west", "east", "south", "north")}
    tags[(1, "east")] = "neumann"
    mp = build_multipatch(mp0.patches, boundary=lambda k, s, m: tags[(k, s)])
    spaces = taylor_hood_spaces(mp, degree=1, refinement=1)
    glob = assemble_global(mp, spaces, rhs=manufactured_rhs,
                           dirichlet=manufactured_velocity)
    us_ref, ps_ref = glob.solve(fix_pressure_mean=False)
    us, ps, rep = solve_stokes_ieti(mp, spaces, rhs=manufactured_rhs,
                                    dirichlet=manufactured_velocity,
                                    use_global_pressure_mean=False,
                                    tol=1e-10, systems=glob.systems)
    assert rep.converged
    for k in range(2):
        assert np.abs(us[k] - us_ref[k]).max() < 1e-8
        assert np.abs(ps[k] - ps_ref[k]).max() < 1e-8


def test_recovered_solution_continuous_and_mean_free():
    mp, spaces, glob = build_grid_problem(3, 3, degree=2)
    us, ps, rep = solve_stokes_ieti(mp, spaces, rhs=manufactured_rhs,
                                    dirichlet=manufactured_velocity,
                                    tol=1e-10, systems=glob.systems)
    umax = max(np.abs(u).max() for u in us)
    ts = np.linspace(0, 1, 50)
    for iface in mp.interfaces:
        da = spaces[iface.a].vel.side_dofs(iface.side_a)
        db = spaces[iface.b].vel.side_dofs(iface.side_b)
        Ba = spaces[iface.a].vel.side_space(iface.side_a).collocation(ts)
        for c in (0, 1):
            ta = Ba @ us[iface.a][c, da]
            tb = Ba @ us[iface.b][c, db]
            assert np.abs(ta - tb).max() < 1e-6 * max(1.0, umax)
    total = sum(np.ones(len(p)) @ (glob.systems[k].Mp @ p) for k, p in enumerate(ps))
    assert abs(total) < 1e-8 * max(1.0, max(np.abs(p).max() for p in ps))


def test_singularity_detected_without_constraints():
    # a floating patch with only the averaging row keeps the constant
    # velocity modes, which the factorization check must flag
    geo = bilinear_patch((0, 0), (1, 0), (0, 1), (1, 1))
    roles = {s: "interface" for s in ("west", "east", "south", "north")}
    ths = build_taylor_hood(geo, degree=1, refinement=1, side_roles=roles,
                            gamma_corners=((0, 0), (1, 0), (0, 1), (1, 1)))
    sysk = assemble_patch(geo, ths)
    n_x = 2 * (ths.n_gamma + ths.n_inner) + ths.n_pressure
    p_off = 2 * (ths.n_gamma + ths.n_inner)
    avg = sysk.pressure_average_row()
    C = sp.coo_matrix(
        (avg, (np.zeros(len(avg), dtype=int), p_off + np.arange(len(avg)))),
        shape=(1, n_x),
    ).tocsr()
    with pytest.raises(SingularLocalSystemError):
        AugmentedLocalSystem(sysk, C, np.zeros(1), label="unconstrained")


def test_pcg_seed_reproducible():
    mp, spaces, glob = build_grid_problem(2, 2)
    op, pc = setup_ieti(mp, spaces, systems=glob.systems)
    g = op.rhs()
    lam1, rep1 = solve_pcg(op.apply_F, pc.apply, g, seed=42)
    lam2, rep2 = solve_pcg(op.apply_F, pc.apply, g, seed=42)
    assert rep1.residuals == rep2.residuals
    assert np.array_equal(lam1, lam2)
    # a different seed changes the multiplier history but not the solution
    lam3, rep3 = solve_pcg(op.apply_F, pc.apply, g, seed=7, tol=1e-12)
    lam4, rep4 = solve_pcg(op.apply_F, pc.apply, g, seed=42, tol=1e-12)
    assert rep3.residuals != rep4.residuals
    us3, ps3, _ = op.recover(lam3)
    us4, ps4, _ = op.recover(lam4)
    for k in range(4):
        assert np.abs(us3[k] - us4[k]).max() < 1e-8


def test_solve_report_fields():
    mp, spaces, glob = build_grid_problem(2, 2)
    us, ps, rep = solve_stokes_ieti(mp, spaces, rhs=manufactured_rhs,
                                    dirichlet=manufactured_velocity,
                                    systems=glob.systems)
    assert rep.converged
    assert rep.kappa >= 1.0
    assert rep.eig_min > 0
    assert rep.eig_max >= rep.eig_min
    assert rep.iterations <= 50
    assert len(rep.residuals) == rep.iterations + 1
    assert rep.residuals[-1] <= 1e-6 * rep.residuals[0]


def test_preconditioner_spd():
    mp, spaces, glob = build_grid_problem(3, 3)
    op, pc = setup_ieti(mp, spaces, systems=glob.systems)
    rng = np.random.default_rng(12)
    for _ in range(20):
        l1 = rng.standard_normal(op.n_lambda)
        l2 = rng.standard_normal(op.n_lambda)
        m1, m2 = pc.apply(l1), pc.apply(l2)
        assert abs(m1 @ l2 - l1 @ m2) < 1e-10 * max(1.0, abs(m1 @ l2))
        assert l1 @ m1 > 0


def test_supmat_identities():
    out = verify_supmat(seed=0, instances=50)
    assert out["instances"] == 50
    assert out["ok"]
    assert out["max_rel_err"] <= 1e-8


def test_supmat_degenerate_cases():
    # zero C with square invertible D: the coupled system decouples and the
    # constrained representation equals the plain one
    rng = np.random.default_rng(3)
    n, m1, m2 = 6, 3, 4
    G = rng.standard_normal((n, n))
    A = G @ G.T + n * np.eye(n)
    B = rng.standard_normal((m1, n))
    C = np.zeros((m2, n))
    D = rng.standard_normal((m2, m2)) + m2 * np.eye(m2)
    M0 = B @ np.linalg.solve(A, B.T)
    S2 = np.block([
        [A, C.T, np.zeros((n, m2))],
        [C, np.zeros((m2, m2)), D.T],
        [np.zeros((m2, n)), D, np.zeros((m2, m2))],
    ])
    M2 = B @ np.linalg.solve(S2, np.vstack([B.T, np.zeros((2 * m2, m1))]))[:n]
    assert np.abs(M2 - M0).max() < 1e-10 * np.abs(M0).max()
