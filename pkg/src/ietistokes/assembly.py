"""Taylor-Hood discretization of the Stokes equations on multi-patch domains.

Velocity components use splines of degree p+1 and pressure degree p, on the
same breakpoints with the same smoothness, pulled back through the geometry
map of each patch. The assembled patch system is

    [ K   D^T ] [u]   [f]
    [ D   0   ] [p] = [h]

with K the vector Laplacian (both velocity components stacked, component
index major), D the divergence rows (one per pressure basis function) and h
the lift contribution of inhomogeneous Dirichlet data. Velocity dofs are
classified as eliminated (Dirichlet), interface (nonzero trace on an
interface edge or shared vertex) or interior.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bspline import TensorSplineSpace, element_rule
from .geometry import check_interface_matching, side_param

__all__ = (
    "TaylorHoodPatchSpace",
    "PatchStokesSystem",
    "GlobalStokesSystem",
    "build_taylor_hood",
    "taylor_hood_spaces",
    "assemble_patch",
    "assemble_global",
    "matched_side_dofs",
    "edge_flux_matrix",
    "divergence_bubble",
    "fortin_correction",
    "patch_errors",
    "total_errors",
    "manufactured_velocity",
    "manufactured_velocity_gradient",
    "manufactured_pressure",
    "manufactured_rhs",
)


# ---------------------------------------------------------------------------
# spaces and dof classification


class TaylorHoodPatchSpace:
    """Velocity/pressure pair on one patch with its dof classification.

    Scalar velocity dofs are classified once; both components share the
    classification. Block ordering of the local system is
    [u_gamma | u_inner | p] with the two components stacked component-major
    inside each velocity block.
    """

    def __init__(self, geo, degree, smoothness, refinement, side_roles,
                 dirichlet_corners=(), gamma_corners=()):
        if degree < 1:
            raise ValueError("pressure degree must be at least 1")
        zx = geo.space.space_x.breakpoints
        zy = geo.space.space_y.breakpoints
        self.geo = geo
        self.degree = int(degree)
        self.smoothness = int(smoothness)
        self.refinement = int(refinement)
        self.vel = TensorSplineSpace.from_breakpoints(zx, zy, degree + 1, smoothness).refine_uniform(refinement)
        self.pre = TensorSplineSpace.from_breakpoints(zx, zy, degree, smoothness).refine_uniform(refinement)
        self.side_roles = dict(side_roles)
        for side, role in self.side_roles.items():
            if role not in ("interface", "dirichlet", "neumann"):
                raise ValueError("unknown side role %r on side %r" % (role, side))

        vel = self.vel
        dir_set = set()
        for side, role in self.side_roles.items():
            if role == "dirichlet":
                dir_set.update(vel.side_dofs(side).tolist())
        for corner in dirichlet_corners:
            dir_set.add(vel.corner_dof(*corner))
        gamma_set = set()
        for side, role in self.side_roles.items():
            if role == "interface":
                gamma_set.update(vel.side_dofs(side).tolist())
        for corner in gamma_corners:
            gamma_set.add(vel.corner_dof(*corner))
        gamma_set -= dir_set

        self.dirichlet = np.array(sorted(dir_set), dtype=int)
        self.gamma = np.array(sorted(gamma_set), dtype=int)
        inner = set(range(vel.dim)) - dir_set - gamma_set
        self.inner = np.array(sorted(inner), dtype=int)
        self._gamma_pos = {d: i for i, d in enumerate(self.gamma)}
        self._inner_pos = {d: i for i, d in enumerate(self.inner)}

    @property
    def n_gamma(self):
        return len(self.gamma)

    @property
    def n_inner(self):
        return len(self.inner)

    @property
    def n_pressure(self):
        return self.pre.dim

    @property
    def n_local(self):
        return 2 * (self.n_gamma + self.n_inner) + self.n_pressure

    def gamma_pos(self, comp, scalar):
        """Position of a velocity dof inside the u_gamma block."""
        return comp * self.n_gamma + self._gamma_pos[scalar]

    def free_scalar(self):
        return np.concatenate([self.gamma, self.inner])


def build_taylor_hood(geo, degree, smoothness=None, refinement=0, side_roles=None,
                      dirichlet_corners=(), gamma_corners=()):
    """Taylor-Hood space on a single patch.

    side_roles defaults to all-Dirichlet. smoothness defaults to degree-1
    (the maximum the pressure degree allows).
    """
    if smoothness is None:
        smoothness = degree - 1
    if side_roles is None:
        side_roles = {side: "dirichlet" for side in ("west", "east", "south", "north")}
    return TaylorHoodPatchSpace(geo, degree, smoothness, refinement, side_roles,
                                dirichlet_corners, gamma_corners)


def taylor_hood_spaces(mp, degree, smoothness=None, refinement=0):
    """Matching Taylor-Hood spaces for all patches of a multi-patch domain.

    Corner dofs at vertices on the closure of the Dirichlet boundary are
    eliminated in every patch that touches the vertex; corner dofs at shared
    non-Dirichlet vertices count as interface dofs even when the patches only
    touch at the corner.
    """
    if smoothness is None:
        smoothness = degree - 1
    dir_corners = [[] for _ in range(mp.n_patches)]
    gam_corners = [[] for _ in range(mp.n_patches)]
    for v in mp.vertices:
        if mp.vertex_is_dirichlet(v):
            for k, corner in v.members:
                dir_corners[k].append(corner)
        elif len(v.patches) >= 2:
            for k, corner in v.members:
                gam_corners[k].append(corner)
    spaces = [
        TaylorHoodPatchSpace(mp.patches[k], degree, smoothness, refinement,
                             mp.side_roles(k), dir_corners[k], gam_corners[k])
        for k in range(mp.n_patches)
    ]
    report = check_interface_matching(mp, [s.vel for s in spaces])
    if not report.ok:
        raise ValueError("interface discretizations do not match: %r" % report.problems)
    return spaces


# ---------------------------------------------------------------------------
# quadrature-ready geometry data


def _geometry_tables(geo, xs, ys):
    """Jacobian data of the map on the tensor grid xs x ys (1d point arrays)."""
    sx, sy = geo.space.space_x, geo.space.space_y
    gx0 = sx.collocation(xs)
    gx1 = sx.collocation(xs, der=1)
    gy0 = sy.collocation(ys)
    gy1 = sy.collocation(ys, der=1)
    if geo.weights is None:
        hom = geo.control
        ncomp = 2
    else:
        hom = np.column_stack([geo.control * geo.weights[:, None], geo.weights])
        ncomp = 3
    net = hom.reshape(geo.space.ny, geo.space.nx, ncomp)
    s = np.einsum("ai,bj,jic->abc", gx0, gy0, net)
    su = np.einsum("ai,bj,jic->abc", gx1, gy0, net)
    sv = np.einsum("ai,bj,jic->abc", gx0, gy1, net)
    if geo.weights is None:
        pts = s
        jac = np.stack([su, sv], axis=-1)
    else:
        w = s[..., 2]
        pts = s[..., :2] / w[..., None]
        ju = (su[..., :2] * w[..., None] - s[..., :2] * su[..., 2:]) / w[..., None] ** 2
        jv = (sv[..., :2] * w[..., None] - s[..., :2] * sv[..., 2:]) / w[..., None] ** 2
        jac = np.stack([ju, jv], axis=-1)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    return pts, jac, det


def _pairs(vx, vy):
    """Combine 1d basis tables into 2d local tables, x index fastest."""
    nq1, n1 = vx.shape
    nq2, n2 = vy.shape
    return np.einsum("qa,rb->qrba", vx, vy).reshape(nq1 * nq2, n1 * n2)


# ---------------------------------------------------------------------------
# patch assembly


class PatchStokesSystem:
    """Assembled Stokes forms and right-hand side of one patch."""

    def __init__(self, ths, Ks, D, Mp, load, area, dirichlet_values):
        self.ths = ths
        self.Ks = Ks          # scalar stiffness, vel.dim x vel.dim
        self.D = D            # divergence, pre.dim x 2*vel.dim (component major)
        self.Mp = Mp          # pressure mass
        self.load = load      # 2 x vel.dim component loads
        self.area = area
        self.dirichlet_values = dirichlet_values  # (2, len(ths.dirichlet))
        self._split()

    def _split(self):
        ths = self.ths
        nv = ths.vel.dim
        g, i, d = ths.gamma, ths.inner, ths.dirichlet
        Ks = self.Ks.tocsr()
        Kgg = Ks[g][:, g]
        Kgi = Ks[g][:, i]
        Kii = Ks[i][:, i]
        self.K_gg = sp.block_diag((Kgg, Kgg)).tocsr()
        self.K_gi = sp.block_diag((Kgi, Kgi)).tocsr()
        self.K_ii = sp.block_diag((Kii, Kii)).tocsr()
        cols_g = np.concatenate([c * nv + g for c in (0, 1)])
        cols_i = np.concatenate([c * nv + i for c in (0, 1)])
        cols_d = np.concatenate([c * nv + d for c in (0, 1)])
        Dc = self.D.tocsc()
        self.D_g = Dc[:, cols_g].tocsr()
        self.D_i = Dc[:, cols_i].tocsr()
        gd = self.dirichlet_values.ravel()  # component major
        Kd_g = sp.block_diag((Ks[g][:, d], Ks[g][:, d])).tocsr()
        Kd_i = sp.block_diag((Ks[i][:, d], Ks[i][:, d])).tocsr()
        self.f_g = np.concatenate([self.load[c][g] for c in (0, 1)]) - Kd_g @ gd
        self.f_i = np.concatenate([self.load[c][i] for c in (0, 1)]) - Kd_i @ gd
        self.h = -(Dc[:, cols_d].tocsr() @ gd)

    def saddle_matrix(self):
        """Full patch saddle matrix on free dofs, blocks [u_g | u_i | p]."""
        return sp.bmat(
            [
                [self.K_gg, self.K_gi, self.D_g.T],
                [self.K_gi.T, self.K_ii, self.D_i.T],
                [self.D_g, self.D_i, None],
            ],
            format="csc",
        )

    def rhs(self):
        return np.concatenate([self.f_g, self.f_i, self.h])

    def pressure_average_row(self):
        """Row evaluating the patch average of the pressure."""
        return np.asarray(self.Mp.sum(axis=0)).ravel() / self.area

    def expand(self, u_g, u_i, p=None):
        """Velocity coefficients (2, nv) from block vectors plus Dirichlet data."""
        ths = self.ths
        out = np.zeros((2, ths.vel.dim))
        ng, ni = ths.n_gamma, ths.n_inner
        for c in (0, 1):
            out[c, ths.gamma] = u_g[c * ng : (c + 1) * ng]
            out[c, ths.inner] = u_i[c * ni : (c + 1) * ni]
            out[c, ths.dirichlet] = self.dirichlet_values[c]
        return out


def _edge_speed(geo, side, t):
    u, v = side_param(side, t)
    _, jac = geo.eval(u, v)
    axis = 1 if side in ("west", "east") else 0
    return np.linalg.norm(jac[..., :, axis], axis=-1)


def _dirichlet_values(geo, ths, data):
    """Coefficients of the boundary data on the eliminated dofs.

    Corner dofs are interpolated exactly; the remaining dofs of each
    Dirichlet side come from the L2 projection of the trace (in the physical
    arc length) with the corner values held fixed.
    """
    vel = ths.vel
    ndir = len(ths.dirichlet)
    values = np.zeros((2, ndir))
    if ndir == 0:
        return values
    pos = {d: i for i, d in enumerate(ths.dirichlet)}

    def gfun(pts):
        if data is None:
            return np.zeros(pts.shape)
        return np.asarray(data(pts), dtype=float)

    # corner interpolation first: every eliminated corner dof gets the exact value
    corners = geo.corners()
    for corner, dof in vel.corner_dofs().items():
        if dof in pos:
            values[:, pos[dof]] = gfun(corners[corner][None, :])[0]

    for side, role in ths.side_roles.items():
        if role != "dirichlet":
            continue
        espace = vel.side_space(side)
        dofs = vel.side_dofs(side)
        n = espace.dim
        tq, wq = element_rule(espace.breakpoints, espace.degree + 3)
        tq, wq = tq.ravel(), wq.ravel()
        B = espace.collocation(tq)
        speed = _edge_speed(geo, side, tq)
        upar, vpar = side_param(side, tq)
        gvals = gfun(geo(upar, vpar))
        M = B.T @ (B * (wq * speed)[:, None])
        ends = np.array([0, n - 1])
        mid = np.arange(1, n - 1)
        for c in (0, 1):
            b = B.T @ (wq * speed * gvals[:, c])
            gc = np.array([values[c, pos[dofs[0]]], values[c, pos[dofs[-1]]]])
            if len(mid):
                sol = np.linalg.solve(M[np.ix_(mid, mid)], b[mid] - M[np.ix_(mid, ends)] @ gc)
                for j, coeff in zip(mid, sol):
                    values[c, pos[dofs[j]]] = coeff
    return values


def assemble_patch(geo, ths, rhs=None, dirichlet=None, nquad=None):
    """Assemble the Stokes forms of one patch.

    rhs and dirichlet are callables taking an (..., 2) array of physical
    points and returning (..., 2) vectors; None means zero. The quadrature
    uses nquad (default: velocity degree + 2) Gauss points per direction per
    element.
    """
    vel, pre = ths.vel, ths.pre
    pv, pp = vel.space_x.degree, pre.space_x.degree
    nq = int(nquad) if nquad else pv + 2
    zx, zy = vel.space_x.breakpoints, vel.space_y.breakpoints
    qx, wx = element_rule(zx, nq)
    qy, wy = element_rule(zy, nq)
    nelx, nely = qx.shape[0], qy.shape[0]

    fvx, tvx = vel.space_x.tabulate(qx)
    fvy, tvy = vel.space_y.tabulate(qy)
    fpx, tpx = pre.space_x.tabulate(qx)
    fpy, tpy = pre.space_y.tabulate(qy)
    pts, jac, det = _geometry_tables(geo, qx.ravel(), qy.ravel())
    if det.min() <= 0.0:
        from .geometry import DegenerateJacobianError

        raise DegenerateJacobianError("nonpositive Jacobian inside patch")

    nv, npre = vel.dim, pre.dim
    nlv, nlp = (pv + 1) ** 2, (pp + 1) ** 2
    nel = nelx * nely
    Ki = np.empty(nel * nlv * nlv, dtype=int)
    Kj = np.empty_like(Ki)
    Kv = np.empty(nel * nlv * nlv)
    Di = np.empty(nel * nlp * nlv * 2, dtype=int)
    Dj = np.empty_like(Di)
    Dv = np.empty(nel * nlp * nlv * 2)
    Mi = np.empty(nel * nlp * nlp, dtype=int)
    Mj = np.empty_like(Mi)
    Mv = np.empty(nel * nlp * nlp)
    load = np.zeros((2, nv))
    area = 0.0

    iv = np.arange(pv + 1)
    ip = np.arange(pp + 1)
    kpos = dpos = mpos = 0
    for ey in range(nely):
        sy = slice(ey * nq, (ey + 1) * nq)
        for ex in range(nelx):
            sx = slice(ex * nq, (ex + 1) * nq)
            det_e = det[sx, sy].ravel()
            wdet = np.outer(wx[ex], wy[ey]).ravel() * det_e
            area += wdet.sum()
            j_e = jac[sx, sy].reshape(-1, 2, 2)
            jinv = np.empty_like(j_e)
            jinv[:, 0, 0] = j_e[:, 1, 1]
            jinv[:, 0, 1] = -j_e[:, 0, 1]
            jinv[:, 1, 0] = -j_e[:, 1, 0]
            jinv[:, 1, 1] = j_e[:, 0, 0]
            jinv /= det_e[:, None, None]

            Nv = _pairs(tvx[0, ex], tvy[0, ey])
            gpar = np.stack(
                [_pairs(tvx[1, ex], tvy[0, ey]), _pairs(tvx[0, ex], tvy[1, ey])], axis=-1
            )
            gphys = np.einsum("qlb,qba->qla", gpar, jinv)
            Np = _pairs(tpx[0, ex], tpy[0, ey])

            ids_v = (vel.index(fvx[ex] + iv[None, :], (fvy[ey] + iv[:, None]))).ravel()
            ids_p = (pre.index(fpx[ex] + ip[None, :], (fpy[ey] + ip[:, None]))).ravel()

            Ke = np.einsum("q,qla,qma->lm", wdet, gphys, gphys)
            Ki[kpos : kpos + nlv * nlv] = np.repeat(ids_v, nlv)
            Kj[kpos : kpos + nlv * nlv] = np.tile(ids_v, nlv)
            Kv[kpos : kpos + nlv * nlv] = Ke.ravel()
            kpos += nlv * nlv

            for c in (0, 1):
                De = np.einsum("q,ql,qm->ml", wdet, gphys[:, :, c], Np)
                Di[dpos : dpos + nlp * nlv] = np.repeat(ids_p, nlv)
                Dj[dpos : dpos + nlp * nlv] = np.tile(c * nv + ids_v, nlp)
                Dv[dpos : dpos + nlp * nlv] = De.ravel()
                dpos += nlp * nlv

            Me = np.einsum("q,qm,qn->mn", wdet, Np, Np)
            Mi[mpos : mpos + nlp * nlp] = np.repeat(ids_p, nlp)
            Mj[mpos : mpos + nlp * nlp] = np.tile(ids_p, nlp)
            Mv[mpos : mpos + nlp * nlp] = Me.ravel()
            mpos += nlp * nlp

            if rhs is not None:
                fvals = np.asarray(rhs(pts[sx, sy].reshape(-1, 2)), dtype=float)
                for c in (0, 1):
                    np.add.at(load[c], ids_v, Nv.T @ (wdet * fvals[:, c]))

    Ks = sp.coo_matrix((Kv, (Ki, Kj)), shape=(nv, nv)).tocsr()
    D = sp.coo_matrix((Dv, (Di, Dj)), shape=(npre, 2 * nv)).tocsr()
    Mp = sp.coo_matrix((Mv, (Mi, Mj)), shape=(npre, npre)).tocsr()
    gdir = _dirichlet_values(geo, ths, dirichlet)
    return PatchStokesSystem(ths, Ks, D, Mp, load, float(area), gdir)


# ---------------------------------------------------------------------------
# edge fluxes and the divergence bubble


def edge_flux_matrix(geo, vel, side, nq=None):
    """Rows evaluating int_edge N_i n_c ds for the dofs with trace on a side.

    Returns (side_dofs, R) with R of shape (len(side_dofs), 2); the flux of a
    velocity coefficient field u is sum_c R[:, c] . u[c, side_dofs].
    """
    espace = vel.side_space(side)
    n = espace.degree + (max(geo.space.space_x.degree, geo.space.space_y.degree) + 2)
    if nq:
        n = int(nq)
    tq, wq = element_rule(espace.breakpoints, n)
    tq, wq = tq.ravel(), wq.ravel()
    B = espace.collocation(tq)
    ndir = geo.side_normal(side, tq)  # outward normal times length element
    R = np.empty((espace.dim, 2))
    for c in (0, 1):
        R[:, c] = B.T @ (wq * ndir[:, c])
    return vel.side_dofs(side), R


def divergence_bubble(ths, side):
    """Scalar coefficients of the biquadratic bubble attached to a side.

    The bubble is t(1-t) along the side, rises linearly in the transverse
    direction and vanishes on the other three sides of the parameter square.
    """
    vel = ths.vel

    def quad(t):
        return t * (1.0 - t)

    cx = vel.space_x.interpolate
    cy = vel.space_y.interpolate
    if side == "east":
        ax, ay = cx(lambda t: t), cy(quad)
    elif side == "west":
        ax, ay = cx(lambda t: 1.0 - t), cy(quad)
    elif side == "north":
        ax, ay = cx(quad), cy(lambda t: t)
    else:
        ax, ay = cx(quad), cy(lambda t: 1.0 - t)
    return np.outer(ay, ax).ravel()  # index iy major, ix fastest


def fortin_correction(mp, spaces, u_list):
    """Edge-bubble interpolant with the interface fluxes of u.

    u_list holds per-patch velocity coefficients (2, nv), assumed conforming
    with zero trace on the domain boundary. The returned field (same layout)
    has, on every interface, the same net flux as u, so u minus the result is
    orthogonal to the patchwise-constant pressures with zero global mean.
    """
    out = [np.zeros_like(u) for u in u_list]
    for iface in mp.interfaces:
        k = iface.a
        geo = mp.patches[k]
        ths = spaces[k]
        dofs, R = edge_flux_matrix(geo, ths.vel, iface.side_a)
        flux_u = sum(R[:, c] @ u_list[k][c, dofs] for c in (0, 1))
        nbar = geo.side_normal(iface.side_a, np.array([0.5]), unit=True)[0]
        bub_a = divergence_bubble(ths, iface.side_a)
        psi_a = nbar[:, None] * bub_a[None, :]
        flux_psi = sum(R[:, c] @ psi_a[c, dofs] for c in (0, 1))
        if abs(flux_psi) < 1e-14 * max(1.0, geo.diameter()):
            raise ValueError("degenerate bubble flux on interface %r" % (iface,))
        bub_b = divergence_bubble(spaces[iface.b], iface.side_b)
        scale = flux_u / flux_psi
        out[k] += scale * psi_a
        out[iface.b] += scale * nbar[:, None] * bub_b[None, :]
    return out


# ---------------------------------------------------------------------------
# monolithic coupled system


class GlobalStokesSystem:
    """Conforming coupled system over all patches (the direct reference path).

    Velocity dofs matched across interfaces (and shared vertices) are
    identified; pressures are patchwise discontinuous.
    """

    def __init__(self, mp, spaces, systems, scalar_l2g, n_scalar):
        self.mp = mp
        self.spaces = spaces
        self.systems = systems
        self.scalar_l2g = scalar_l2g
        self.n_scalar = n_scalar
        self.pressure_offsets = np.cumsum([0] + [s.pre.dim for s in spaces])
        self.n_pressure = int(self.pressure_offsets[-1])

        # global Dirichlet data: a dof is eliminated when any patch eliminates it
        self.dir_mask = np.zeros(n_scalar, dtype=bool)
        self.dir_values = np.zeros((2, n_scalar))
        for k, ths in enumerate(spaces):
            l2g = scalar_l2g[k]
            gd = systems[k].dirichlet_values
            for j, dof in enumerate(ths.dirichlet):
                gdof = l2g[dof]
                if self.dir_mask[gdof]:
                    if np.abs(self.dir_values[:, gdof] - gd[:, j]).max() > 1e-8:
                        raise ValueError("inconsistent Dirichlet data at shared dof")
                else:
                    self.dir_mask[gdof] = True
                    self.dir_values[:, gdof] = gd[:, j]
        self.free = np.flatnonzero(~self.dir_mask)
        self._free_pos = -np.ones(n_scalar, dtype=int)
        self._free_pos[self.free] = np.arange(len(self.free))

        # assemble global scalar stiffness, divergence, loads
        NV = n_scalar
        Ki, Kj, Kv = [], [], []
        Di, Dj, Dv = [], [], []
        load = np.zeros((2, NV))
        for k, ths in enumerate(spaces):
            l2g = scalar_l2g[k]
            A = systems[k].Ks.tocoo()
            Ki.append(l2g[A.row])
            Kj.append(l2g[A.col])
            Kv.append(A.data)
            B = systems[k].D.tocoo()
            nv = ths.vel.dim
            comp = B.col // nv
            Di.append(B.row + self.pressure_offsets[k])
            Dj.append(comp * NV + l2g[B.col % nv])
            Dv.append(B.data)
            for c in (0, 1):
                np.add.at(load[c], l2g, systems[k].load[c])
        self.Ks = sp.coo_matrix(
            (np.concatenate(Kv), (np.concatenate(Ki), np.concatenate(Kj))), shape=(NV, NV)
        ).tocsr()
        self.D = sp.coo_matrix(
            (np.concatenate(Dv), (np.concatenate(Di), np.concatenate(Dj))),
            shape=(self.n_pressure, 2 * NV),
        ).tocsr()
        self.load = load
        self.Mp = sp.block_diag([s.Mp for s in systems]).tocsr()
        self.area = float(sum(s.area for s in systems))

    @property
    def n_free_velocity(self):
        return 2 * len(self.free)

    @property
    def n_dofs(self):
        return self.n_free_velocity + self.n_pressure

    def free_blocks(self):
        """(K_ff, D_f, f, h) on free velocity dofs, components stacked."""
        f = self.free
        d = np.flatnonzero(self.dir_mask)
        Ks = self.Ks
        Kff = sp.block_diag((Ks[f][:, f], Ks[f][:, f])).tocsr()
        NV = self.n_scalar
        Dc = self.D.tocsc()
        cols_f = np.concatenate([c * NV + f for c in (0, 1)])
        cols_d = np.concatenate([c * NV + d for c in (0, 1)])
        gd = np.concatenate([self.dir_values[c, d] for c in (0, 1)])
        Df = Dc[:, cols_f].tocsr()
        Kfd = sp.block_diag((Ks[f][:, d], Ks[f][:, d])).tocsr()
        rhs_f = np.concatenate([self.load[c, f] for c in (0, 1)]) - Kfd @ gd
        h = -(Dc[:, cols_d].tocsr() @ gd)
        return Kff, Df, rhs_f, h

    def pressure_integral_row(self):
        return np.asarray(self.Mp.sum(axis=0)).ravel()

    def solve(self, fix_pressure_mean=True):
        """Direct sparse solve; returns per-patch (u, p) coefficient arrays."""
        Kff, Df, rhs_f, h = self.free_blocks()
        nU = Kff.shape[0]
        if fix_pressure_mean:
            m = self.pressure_integral_row()
            A = sp.bmat(
                [
                    [Kff, Df.T, None],
                    [Df, None, sp.csr_matrix(m[:, None])],
                    [None, sp.csr_matrix(m[None, :]), None],
                ],
                format="csc",
            )
            b = np.concatenate([rhs_f, h, [0.0]])
        else:
            A = sp.bmat([[Kff, Df.T], [Df, None]], format="csc")
            b = np.concatenate([rhs_f, h])
        x = spla.spsolve(A, b)
        uf = x[:nU].reshape(2, -1)
        p = x[nU : nU + self.n_pressure]
        uglob = self.dir_values.copy()
        uglob[:, self.free] = uf
        us = [uglob[:, l2g] for l2g in self.scalar_l2g]
        ps = [
            p[self.pressure_offsets[k] : self.pressure_offsets[k + 1]]
            for k in range(len(self.spaces))
        ]
        return us, ps


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def matched_side_dofs(mp, spaces, iface):
    """Matched velocity dof lists (dofs_a[i] <-> dofs_b[i]) along an interface."""
    dofs_a = spaces[iface.a].vel.side_dofs(iface.side_a)
    dofs_b = spaces[iface.b].vel.side_dofs(iface.side_b)
    if iface.reversed_:
        dofs_b = dofs_b[::-1]
    if len(dofs_a) != len(dofs_b):
        raise ValueError("interface dof counts differ")
    return dofs_a, dofs_b


def assemble_global(mp, spaces, rhs=None, dirichlet=None, nquad=None, systems=None):
    """Assemble the conforming coupled system for a whole multi-patch domain."""
    if systems is None:
        systems = [
            assemble_patch(mp.patches[k], spaces[k], rhs, dirichlet, nquad)
            for k in range(mp.n_patches)
        ]
    offsets = np.cumsum([0] + [s.vel.dim for s in spaces])
    uf = _UnionFind(int(offsets[-1]))
    for iface in mp.interfaces:
        da, db = matched_side_dofs(mp, spaces, iface)
        for i, j in zip(offsets[iface.a] + da, offsets[iface.b] + db):
            uf.union(int(i), int(j))
    for v in mp.vertices:
        if len(v.members) < 2:
            continue
        first = None
        for k, corner in v.members:
            dof = offsets[k] + spaces[k].vel.corner_dof(*corner)
            if first is None:
                first = dof
            else:
                uf.union(int(first), int(dof))
    reps = {}
    scalar_l2g = []
    for k, ths in enumerate(spaces):
        l2g = np.empty(ths.vel.dim, dtype=int)
        for i in range(ths.vel.dim):
            r = uf.find(int(offsets[k] + i))
            if r not in reps:
                reps[r] = len(reps)
            l2g[i] = reps[r]
        scalar_l2g.append(l2g)
    return GlobalStokesSystem(mp, spaces, systems, scalar_l2g, len(reps))


# ---------------------------------------------------------------------------
# errors against a known solution


def patch_errors(geo, ths, u, p, exact_u=None, exact_grad_u=None, exact_p=None, nquad=None):
    """Squared error moments of a discrete solution on one patch.

    Returns a dict with the squared H1 seminorm and L2 errors of the
    velocity, and for the pressure the raw moments (integral of the
    difference, of its square, and the area) so the caller can adjust for the
    mean across patches.
    """
    vel, pre = ths.vel, ths.pre
    pv = vel.space_x.degree
    nq = int(nquad) if nquad else pv + 3
    qx, wx = element_rule(vel.space_x.breakpoints, nq)
    qy, wy = element_rule(vel.space_y.breakpoints, nq)
    fvx, tvx = vel.space_x.tabulate(qx)
    fvy, tvy = vel.space_y.tabulate(qy)
    fpx, tpx = pre.space_x.tabulate(qx)
    fpy, tpy = pre.space_y.tabulate(qy)
    pts, jac, det = _geometry_tables(geo, qx.ravel(), qy.ravel())

    h1 = l2 = 0.0
    pdiff = pdiff2 = area = 0.0
    iv = np.arange(pv + 1)
    ip = np.arange(pre.space_x.degree + 1)
    for ey in range(qy.shape[0]):
        sy = slice(ey * nq, (ey + 1) * nq)
        for ex in range(qx.shape[0]):
            sx = slice(ex * nq, (ex + 1) * nq)
            det_e = det[sx, sy].ravel()
            wdet = np.outer(wx[ex], wy[ey]).ravel() * det_e
            j_e = jac[sx, sy].reshape(-1, 2, 2)
            jinv = np.empty_like(j_e)
            jinv[:, 0, 0] = j_e[:, 1, 1]
            jinv[:, 0, 1] = -j_e[:, 0, 1]
            jinv[:, 1, 0] = -j_e[:, 1, 0]
            jinv[:, 1, 1] = j_e[:, 0, 0]
            jinv /= det_e[:, None, None]
            P = pts[sx, sy].reshape(-1, 2)
            area += wdet.sum()

            Nv = _pairs(tvx[0, ex], tvy[0, ey])
            gpar = np.stack(
                [_pairs(tvx[1, ex], tvy[0, ey]), _pairs(tvx[0, ex], tvy[1, ey])], axis=-1
            )
            gphys = np.einsum("qlb,qba->qla", gpar, jinv)
            ids_v = (vel.index(fvx[ex] + iv[None, :], (fvy[ey] + iv[:, None]))).ravel()
            uh = np.stack([Nv @ u[c, ids_v] for c in (0, 1)], axis=-1)
            guh = np.stack(
                [np.einsum("qla,l->qa", gphys, u[c, ids_v]) for c in (0, 1)], axis=1
            )  # (Q, comp, dx)
            ue = exact_u(P) if exact_u is not None else 0.0
            ge = exact_grad_u(P) if exact_grad_u is not None else 0.0
            l2 += wdet @ np.sum((uh - ue) ** 2, axis=-1)
            h1 += wdet @ np.sum((guh - ge) ** 2, axis=(-2, -1))

            if p is not None:
                Np = _pairs(tpx[0, ex], tpy[0, ey])
                ids_p = (pre.index(fpx[ex] + ip[None, :], (fpy[ey] + ip[:, None]))).ravel()
                ph = Np @ p[ids_p]
                pe = exact_p(P) if exact_p is not None else 0.0
                d = ph - pe
                pdiff += wdet @ d
                pdiff2 += wdet @ d**2
    return {
        "h1_u_sq": float(h1),
        "l2_u_sq": float(l2),
        "p_diff": float(pdiff),
        "p_diff_sq": float(pdiff2),
        "area": float(area),
    }


def total_errors(mp, spaces, us, ps, exact_u=None, exact_grad_u=None, exact_p=None):
    """Velocity H1 seminorm error and mean-adjusted pressure L2 error."""
    acc = {"h1_u_sq": 0.0, "l2_u_sq": 0.0, "p_diff": 0.0, "p_diff_sq": 0.0, "area": 0.0}
    for k in range(mp.n_patches):
        e = patch_errors(
            mp.patches[k], spaces[k], us[k], None if ps is None else ps[k],
            exact_u, exact_grad_u, exact_p,
        )
        for key in acc:
            acc[key] += e[key]
    h1 = np.sqrt(acc["h1_u_sq"])
    l2u = np.sqrt(acc["l2_u_sq"])
    if ps is None:
        return h1, l2u, None
    var = acc["p_diff_sq"] - acc["p_diff"] ** 2 / acc["area"]
    return h1, l2u, float(np.sqrt(max(var, 0.0)))


# ---------------------------------------------------------------------------
# the smooth reference solution used by the convergence studies


def manufactured_velocity(pts):
    x, y = pts[..., 0], pts[..., 1]
    return np.stack(
        [-np.sin(np.pi * x) * np.cos(np.pi * y), np.cos(np.pi * x) * np.sin(np.pi * y)],
        axis=-1,
    )


def manufactured_velocity_gradient(pts):
    x, y = pts[..., 0], pts[..., 1]
    pi = np.pi
    g = np.empty(pts.shape[:-1] + (2, 2))
    g[..., 0, 0] = -pi * np.cos(pi * x) * np.cos(pi * y)
    g[..., 0, 1] = pi * np.sin(pi * x) * np.sin(pi * y)
    g[..., 1, 0] = -pi * np.sin(pi * x) * np.sin(pi * y)
    g[..., 1, 1] = pi * np.cos(pi * x) * np.cos(pi * y)
    return g


def manufactured_pressure(pts):
    return np.sin(np.pi * pts[..., 0])


def manufactured_rhs(pts):
    x, y = pts[..., 0], pts[..., 1]
    pi = np.pi
    return np.stack(
        [
            -pi * np.cos(pi * x) - 2 * pi**2 * np.sin(pi * x) * np.cos(pi * y),
            2 * pi**2 * np.cos(pi * x) * np.sin(pi * y),
        ],
        axis=-1,
    )
