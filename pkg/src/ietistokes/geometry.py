"""Geometry maps and multi-patch topology.

A patch is the image of the unit square under a (possibly rational)
tensor-product spline map. Patches are glued along whole edges; partial edge
overlaps (T-junctions) are rejected. Sides are named west/east/south/north
(west: xi1 = 0, east: xi1 = 1, south: xi2 = 0, north: xi2 = 1); the edge
parameter runs with increasing xi2 on west/east and increasing xi1 on
south/north.
"""

import numpy as np

from .bspline import TensorSplineSpace, UnivariateSplineSpace, element_rule, gauss_rule_1d

__all__ = (
    "SIDES",
    "GeometryMap",
    "Interface",
    "MultiPatch",
    "TopologyReport",
    "MatchReport",
    "DegenerateJacobianError",
    "TopologyError",
    "build_multipatch",
    "validate_topology",
    "check_interface_matching",
    "save_multipatch",
    "load_multipatch",
    "bilinear_patch",
)

SIDES = ("west", "east", "south", "north")

# (corner at edge parameter 0, corner at edge parameter 1), corners as (cx, cy)
_SIDE_CORNERS = {
    "west": ((0, 0), (0, 1)),
    "east": ((1, 0), (1, 1)),
    "south": ((0, 0), (1, 0)),
    "north": ((0, 1), (1, 1)),
}


class DegenerateJacobianError(RuntimeError):
    """The geometry Jacobian determinant is not strictly positive."""


class TopologyError(RuntimeError):
    """The patches do not form an admissible multi-patch decomposition."""


def side_param(side, t):
    """Parameter-square points of a side at edge parameters t."""
    t = np.asarray(t, dtype=float)
    zeros = np.zeros_like(t)
    ones = np.ones_like(t)
    if side == "west":
        return zeros, t
    if side == "east":
        return ones, t
    if side == "south":
        return t, zeros
    if side == "north":
        return t, ones
    raise ValueError("unknown side %r" % (side,))


def side_corners(side):
    return _SIDE_CORNERS[side]


class GeometryMap:
    """Tensor-product spline (or NURBS) map from the unit square to the plane.

    Parameters
    ----------
    space : TensorSplineSpace
        Space of the coordinate functions; x index runs fastest in the
        control net.
    control : (dim, 2) array
        Control points.
    weights : (dim,) array or None
        Positive weights; None for a polynomial map.
    """

    def __init__(self, space, control, weights=None):
        self.space = space
        self.control = np.asarray(control, dtype=float)
        if self.control.shape != (space.dim, 2):
            raise ValueError("control net must have shape (dim, 2)")
        if weights is None:
            self.weights = None
        else:
            self.weights = np.asarray(weights, dtype=float)
            if self.weights.shape != (space.dim,):
                raise ValueError("weights must have shape (dim,)")
            if not (self.weights > 0).all():
                raise ValueError("weights must be positive")

    @property
    def is_rational(self):
        return self.weights is not None

    def _homogeneous(self):
        if self.weights is None:
            return self.control, None
        return self.control * self.weights[:, None], self.weights

    def eval(self, u, v, nders=1):
        """Map values and first derivatives at parameter points.

        u, v are broadcastable arrays; returns (points, jac) with points of
        shape u.shape + (2,) and jac of shape u.shape + (2, 2), jac[..., i, j]
        = d x_i / d xi_j. With nders=0 only points are computed and jac is
        None.
        """
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        u, v = np.broadcast_arrays(u, v)
        shape = u.shape
        uu = u.ravel()
        vv = v.ravel()
        sx, sy = self.space.space_x, self.space.space_y
        px, py = sx.degree, sy.degree
        hom, w = self._homogeneous()
        ncomp = 2 if w is None else 3
        coeffs = np.empty((self.space.dim, ncomp))
        coeffs[:, :2] = hom
        if w is not None:
            coeffs[:, 2] = w
        net = coeffs.reshape(self.space.ny, self.space.nx, ncomp)

        pts = np.empty((uu.size, 2))
        jac = np.empty((uu.size, 2, 2)) if nders else None
        for k in range(uu.size):
            fx, dx = sx.eval_all(uu[k], nders)
            fy, dy = sy.eval_all(vv[k], nders)
            block = net[fy : fy + py + 1, fx : fx + px + 1, :]
            s = np.einsum("a,b,bac->c", dx[0], dy[0], block)
            if nders:
                su = np.einsum("a,b,bac->c", dx[1], dy[0], block)
                sv = np.einsum("a,b,bac->c", dx[0], dy[1], block)
            if w is None:
                pts[k] = s
                if nders:
                    jac[k, :, 0] = su
                    jac[k, :, 1] = sv
            else:
                pts[k] = s[:2] / s[2]
                if nders:
                    jac[k, :, 0] = (su[:2] * s[2] - s[:2] * su[2]) / s[2] ** 2
                    jac[k, :, 1] = (sv[:2] * s[2] - s[:2] * sv[2]) / s[2] ** 2
        pts = pts.reshape(shape + (2,))
        if nders:
            jac = jac.reshape(shape + (2, 2))
        return pts, jac

    def __call__(self, u, v):
        return self.eval(u, v, nders=0)[0]

    def corners(self):
        """Physical images of the four parameter corners, keyed by (cx, cy)."""
        pts = self(np.array([0.0, 1.0, 0.0, 1.0]), np.array([0.0, 0.0, 1.0, 1.0]))
        return {(0, 0): pts[0], (1, 0): pts[1], (0, 1): pts[2], (1, 1): pts[3]}

    def side_points(self, side, t):
        u, v = side_param(side, t)
        return self(u, v)

    def side_normal(self, side, t, unit=False):
        """Outward normal along a side.

        Without unit=True the result is the outward normal times the length
        element, so that integral_edge f n ds = integral_0^1 f(t) * result dt.
        """
        u, v = side_param(side, t)
        _, jac = self.eval(u, v)
        if side in ("west", "east"):
            tang = jac[..., :, 1]
        else:
            tang = jac[..., :, 0]
        n = np.empty_like(tang)
        if side in ("east", "south"):
            n[..., 0] = tang[..., 1]
            n[..., 1] = -tang[..., 0]
        else:
            n[..., 0] = -tang[..., 1]
            n[..., 1] = tang[..., 0]
        if unit:
            n = n / np.linalg.norm(n, axis=-1, keepdims=True)
        return n

    def jacobian_range(self, n=5):
        """Extremes of det(jac) on an n x n per-element sample grid."""
        zx = self.space.space_x.breakpoints
        zy = self.space.space_y.breakpoints
        ux = np.concatenate([np.linspace(a, b, n) for a, b in zip(zx[:-1], zx[1:])])
        uy = np.concatenate([np.linspace(a, b, n) for a, b in zip(zy[:-1], zy[1:])])
        uu, vv = np.meshgrid(ux, uy, indexing="ij")
        _, jac = self.eval(uu, vv)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        return float(det.min()), float(det.max())

    def check_regular(self, n=5):
        dmin, _ = self.jacobian_range(n)
        if dmin <= 0.0:
            raise DegenerateJacobianError(
                "geometry map is degenerate: min det(jac) = %g" % dmin
            )

    def distortion(self, n=4):
        """max of ||jac|| * ||jac^-1|| (spectral norms) over a sample grid."""
        zx = self.space.space_x.breakpoints
        zy = self.space.space_y.breakpoints
        ux = np.concatenate([np.linspace(a, b, n + 2)[1:-1] for a, b in zip(zx[:-1], zx[1:])])
        uy = np.concatenate([np.linspace(a, b, n + 2)[1:-1] for a, b in zip(zy[:-1], zy[1:])])
        uu, vv = np.meshgrid(ux, uy, indexing="ij")
        _, jac = self.eval(uu, vv)
        sv = np.linalg.svd(jac, compute_uv=False)
        return float(np.max(sv[..., 0] / sv[..., 1]))

    def diameter(self, n=9):
        """Diameter of the patch, estimated from boundary samples."""
        t = np.linspace(0.0, 1.0, n)
        pts = np.concatenate([self.side_points(side, t) for side in SIDES])
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))

    def area(self, n=6):
        """Area by per-element Gauss quadrature of det(jac)."""
        xs, wx = element_rule(self.space.space_x.breakpoints, n)
        ys, wy = element_rule(self.space.space_y.breakpoints, n)
        uu, vv = np.meshgrid(xs.ravel(), ys.ravel(), indexing="ij")
        _, jac = self.eval(uu, vv)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        return float(np.einsum("i,j,ij->", wx.ravel(), wy.ravel(), det))


def bilinear_patch(p00, p10, p01, p11):
    """Bilinear map of the unit square onto a quadrilateral."""
    space = TensorSplineSpace.from_breakpoints([0.0, 1.0], [0.0, 1.0], 1, 0)
    control = np.array([p00, p10, p01, p11], dtype=float)
    return GeometryMap(space, control)


class Interface:
    """A shared whole edge between two patches.

    a < b are patch indices; reversed_ is True when the edge parameters of the
    two sides run in opposite directions.
    """

    def __init__(self, a, side_a, b, side_b, reversed_):
        if not a < b:
            raise ValueError("interface patches must satisfy a < b")
        self.a = int(a)
        self.side_a = side_a
        self.b = int(b)
        self.side_b = side_b
        self.reversed_ = bool(reversed_)

    def astuple(self):
        return (self.a, self.side_a, self.b, self.side_b, self.reversed_)

    def __repr__(self):
        arrow = "<->" if not self.reversed_ else "<-|->"
        return "Interface(%d.%s %s %d.%s)" % (self.a, self.side_a, arrow, self.b, self.side_b)

    def __eq__(self, other):
        return isinstance(other, Interface) and self.astuple() == other.astuple()

    def __hash__(self):
        return hash(self.astuple())


class Vertex:
    """A physical corner point with its (patch, corner) incidences."""

    def __init__(self, point, members):
        self.point = np.asarray(point, dtype=float)
        self.members = list(members)  # (patch index, (cx, cy))

    @property
    def patches(self):
        return sorted({k for k, _ in self.members})

    def __repr__(self):
        return "Vertex(%s, patches=%s)" % (np.round(self.point, 6), self.patches)


class MultiPatch:
    """Patches, interfaces, boundary tags and shared vertices."""

    def __init__(self, patches, interfaces, boundary, vertices, tol):
        self.patches = list(patches)
        self.interfaces = list(interfaces)
        self.boundary = dict(boundary)  # (patch, side) -> "dirichlet" | "neumann"
        self.vertices = list(vertices)
        self.tol = float(tol)
        self._side_roles = {}
        for iface in self.interfaces:
            self._side_roles[(iface.a, iface.side_a)] = "interface"
            self._side_roles[(iface.b, iface.side_b)] = "interface"
        for key, tag in self.boundary.items():
            self._side_roles[key] = tag

    @property
    def n_patches(self):
        return len(self.patches)

    def side_role(self, k, side):
        return self._side_roles[(k, side)]

    def side_roles(self, k):
        return {side: self.side_role(k, side) for side in SIDES}

    def interfaces_of(self, k):
        return [i for i in self.interfaces if k in (i.a, i.b)]

    def diameters(self):
        return np.array([g.diameter() for g in self.patches])

    def areas(self, n=6):
        return np.array([g.area(n) for g in self.patches])

    def vertex_is_dirichlet(self, vertex):
        """True when the vertex lies on the closure of the Dirichlet boundary."""
        for k, corner in vertex.members:
            for side in SIDES:
                if corner in side_corners(side) and self._side_roles.get((k, side)) == "dirichlet":
                    return True
        return False

    def primal_vertices(self):
        """Vertices shared by two or more patches, off the Dirichlet boundary."""
        return [
            j
            for j, v in enumerate(self.vertices)
            if len(v.patches) >= 2 and not self.vertex_is_dirichlet(v)
        ]

    def dirichlet_vertices(self):
        return [j for j, v in enumerate(self.vertices) if self.vertex_is_dirichlet(v)]


def _detect_interfaces(patches, tol):
    """Match sides by their corner point pairs; flag partial overlaps."""
    corners = [g.corners() for g in patches]
    sides = []
    for k, g in enumerate(patches):
        for side in SIDES:
            (c0, c1) = side_corners(side)
            sides.append((k, side, corners[k][c0], corners[k][c1]))

    interfaces = []
    matched = set()
    for i in range(len(sides)):
        k, sk, a0, a1 = sides[i]
        for j in range(i + 1, len(sides)):
            l, sl, b0, b1 = sides[j]
            if l == k:
                continue
            aligned = np.linalg.norm(a0 - b0) < tol and np.linalg.norm(a1 - b1) < tol
            reverse = np.linalg.norm(a0 - b1) < tol and np.linalg.norm(a1 - b0) < tol
            if not (aligned or reverse):
                continue
            if (k, sk) in matched or (l, sl) in matched:
                raise TopologyError(
                    "side (%d, %s) or (%d, %s) matches more than one side" % (k, sk, l, sl)
                )
            interfaces.append(Interface(k, sk, l, sl, reversed_=not aligned))
            matched.add((k, sk))
            matched.add((l, sl))
    return interfaces, matched


def _find_partial_overlaps(patches, matched, tol, nsample=17):
    """Unmatched side pairs whose traces overlap: T-junction violations."""
    t = np.linspace(0.0, 1.0, nsample)
    samples = {}
    boxes = {}
    for k, g in enumerate(patches):
        for side in SIDES:
            if (k, side) in matched:
                continue
            pts = g.side_points(side, t)
            samples[(k, side)] = pts
            boxes[(k, side)] = (pts.min(axis=0) - tol, pts.max(axis=0) + tol)
    keys = sorted(samples.keys())
    violations = []
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            (k, sk), (l, sl) = keys[i], keys[j]
            if k == l:
                continue
            lo1, hi1 = boxes[(k, sk)]
            lo2, hi2 = boxes[(l, sl)]
            if (lo1 > hi2).any() or (lo2 > hi1).any():
                continue
            p = samples[(k, sk)]
            q = samples[(l, sl)]
            d2 = np.sum((p[:, None, :] - q[None, :, :]) ** 2, axis=-1)
            # interior sample of one side sitting on the other side
            near = np.sqrt(d2.min(axis=1)) < tol
            if near[1:-1].any():
                violations.append((k, sk, l, sl))
    return violations


def _cluster_vertices(patches, tol):
    vertices = []
    for k, g in enumerate(patches):
        for corner, pt in g.corners().items():
            for v in vertices:
                if np.linalg.norm(v.point - pt) < tol:
                    v.members.append((k, corner))
                    break
            else:
                vertices.append(Vertex(pt, [(k, corner)]))
    return vertices


def build_multipatch(patches, boundary="dirichlet", tol=None, check=True):
    """Detect interfaces and vertices and assemble a MultiPatch.

    boundary assigns tags to the non-interface sides: a single tag for all of
    them, a dict {(patch, side): tag} of overrides (default "dirichlet"), or a
    callable (patch, side, midpoint) -> tag.
    """
    patches = list(patches)
    if tol is None:
        tol = 1e-8 * float(np.median([g.diameter() for g in patches]))
    if check:
        for g in patches:
            g.check_regular()
    interfaces, matched = _detect_interfaces(patches, tol)
    overlaps = _find_partial_overlaps(patches, matched, tol)
    if overlaps:
        raise TopologyError(
            "partial edge overlaps (T-junctions) detected: %s"
            % ", ".join("%d.%s/%d.%s" % v for v in overlaps)
        )
    tags = {}
    for k, g in enumerate(patches):
        for side in SIDES:
            if (k, side) in matched:
                continue
            if callable(boundary):
                mid = g.side_points(side, np.array([0.5]))[0]
                tags[(k, side)] = boundary(k, side, mid)
            elif isinstance(boundary, dict):
                tags[(k, side)] = boundary.get((k, side), "dirichlet")
            else:
                tags[(k, side)] = boundary
    for key, tag in tags.items():
        if tag not in ("dirichlet", "neumann"):
            raise ValueError("unknown boundary tag %r for side %s" % (tag, key))
    vertices = _cluster_vertices(patches, tol)
    return MultiPatch(patches, interfaces, tags, vertices, tol)


class TopologyReport:
    def __init__(self, ok, violations, n_interfaces, max_vertex_patches, diameters, distortions):
        self.ok = ok
        self.violations = violations
        self.n_interfaces = n_interfaces
        self.max_vertex_patches = max_vertex_patches
        self.diameters = diameters
        self.distortions = distortions

    def __repr__(self):
        return "TopologyReport(ok=%s, interfaces=%d, violations=%s)" % (
            self.ok,
            self.n_interfaces,
            self.violations,
        )


def validate_topology(mp, tol=None, nsample=17):
    """Geometric sanity checks of a multi-patch decomposition.

    Verifies positive Jacobians, that matched sides carry the same trace (not
    just the same corners), that interface normals from both patches are
    opposite, and reports per-patch diameters and distortion. Violations are
    collected, not raised.
    """
    tol = mp.tol if tol is None else float(tol)
    violations = []
    for k, g in enumerate(mp.patches):
        dmin, _ = g.jacobian_range()
        if dmin <= 0.0:
            violations.append(("jacobian", k, dmin))
    t = np.linspace(0.0, 1.0, nsample)
    for iface in mp.interfaces:
        ga, gb = mp.patches[iface.a], mp.patches[iface.b]
        tb = 1.0 - t if iface.reversed_ else t
        pa = ga.side_points(iface.side_a, t)
        pb = gb.side_points(iface.side_b, tb)
        scale = max(ga.diameter(), gb.diameter())
        gap = float(np.linalg.norm(pa - pb, axis=1).max())
        if gap > 100 * tol * max(scale, 1.0):
            violations.append(("trace", iface.astuple(), gap))
            continue
        na = ga.side_normal(iface.side_a, t, unit=True)
        nb = gb.side_normal(iface.side_b, tb, unit=True)
        if float(np.abs(na + nb).max()) > 1e-6:
            violations.append(("normal", iface.astuple(), float(np.abs(na + nb).max())))
    distortions = np.array([g.distortion() for g in mp.patches])
    maxinc = max((len(v.patches) for v in mp.vertices), default=0)
    return TopologyReport(
        ok=not violations,
        violations=violations,
        n_interfaces=len(mp.interfaces),
        max_vertex_patches=maxinc,
        diameters=mp.diameters(),
        distortions=distortions,
    )


class MatchReport:
    def __init__(self, ok, problems):
        self.ok = ok
        self.problems = problems

    def __repr__(self):
        return "MatchReport(ok=%s, problems=%s)" % (self.ok, self.problems)


def _mirror_breakpoints(z):
    return np.sort(1.0 - np.asarray(z))


def check_interface_matching(mp, spaces, tol=1e-10):
    """Check that discrete traces agree along every interface.

    spaces is one TensorSplineSpace per patch. Along each interface the edge
    spaces must have the same degree and smoothness and matching breakpoints
    (mirrored when the orientation is reversed), and the geometry traces must
    agree at the Greville points of the edge space. Returns a MatchReport.
    """
    problems = []
    for iface in mp.interfaces:
        ea = spaces[iface.a].side_space(iface.side_a)
        eb = spaces[iface.b].side_space(iface.side_b)
        if ea.degree != eb.degree or ea.smoothness != eb.smoothness:
            problems.append(("degree", iface.astuple(), (ea.degree, eb.degree)))
            continue
        zb = eb.breakpoints if not iface.reversed_ else _mirror_breakpoints(eb.breakpoints)
        if len(ea.breakpoints) != len(zb) or np.abs(ea.breakpoints - zb).max() > tol:
            problems.append(("breakpoints", iface.astuple(), None))
            continue
        t = ea.greville()
        tb = 1.0 - t if iface.reversed_ else t
        pa = mp.patches[iface.a].side_points(iface.side_a, t)
        pb = mp.patches[iface.b].side_points(iface.side_b, tb)
        scale = max(mp.patches[iface.a].diameter(), 1.0)
        gap = float(np.linalg.norm(pa - pb, axis=1).max())
        if gap > 1e-8 * scale:
            problems.append(("trace", iface.astuple(), gap))
    return MatchReport(ok=not problems, problems=problems)


def save_multipatch(mp, path):
    """Write a multi-patch geometry to a text file.

    Format (line oriented, '#' comments allowed):

        patches <K>
        patch <k>
        degrees <px> <py>
        breakpoints_x <z0> <z1> ...
        breakpoints_y <z0> <z1> ...
        controlpoints           # nx*ny lines "x y", x index fastest
        ...
        weights                 # optional, nx*ny lines
        ...
        interfaces <n>          # optional; re-detected when absent
        <a> <side_a> <b> <side_b> <aligned|reversed>
        boundaries <n>
        <k> <side> <dirichlet|neumann>
    """
    lines = ["patches %d" % mp.n_patches]
    for k, g in enumerate(mp.patches):
        sx, sy = g.space.space_x, g.space.space_y
        lines.append("patch %d" % k)
        lines.append("degrees %d %d" % (sx.degree, sy.degree))
        lines.append("smoothness %d %d" % (sx.smoothness, sy.smoothness))
        lines.append("breakpoints_x " + " ".join("%.17g" % z for z in sx.breakpoints))
        lines.append("breakpoints_y " + " ".join("%.17g" % z for z in sy.breakpoints))
        lines.append("controlpoints")
        for p in g.control:
            lines.append("%.17g %.17g" % (p[0], p[1]))
        if g.is_rational:
            lines.append("weights")
            for w in g.weights:
                lines.append("%.17g" % w)
    lines.append("interfaces %d" % len(mp.interfaces))
    for i in mp.interfaces:
        lines.append(
            "%d %s %d %s %s"
            % (i.a, i.side_a, i.b, i.side_b, "reversed" if i.reversed_ else "aligned")
        )
    lines.append("boundaries %d" % len(mp.boundary))
    for (k, side), tag in sorted(mp.boundary.items()):
        lines.append("%d %s %s" % (k, side, tag))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_multipatch(path):
    """Read a multi-patch geometry written by save_multipatch."""
    with open(path) as fh:
        raw = [ln.split("#", 1)[0].strip() for ln in fh]
    lines = [ln for ln in raw if ln]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise ValueError("unexpected end of geometry file")
        ln = lines[pos]
        pos += 1
        return ln

    head = take().split()
    if head[0] != "patches":
        raise ValueError("geometry file must start with 'patches <K>'")
    npatches = int(head[1])
    patches = []
    for _ in range(npatches):
        if take().split()[0] != "patch":
            raise ValueError("expected 'patch <k>'")
        deg = take().split()
        if deg[0] != "degrees":
            raise ValueError("expected 'degrees'")
        px, py = int(deg[1]), int(deg[2])
        sm = lines[pos].split()
        if sm[0] == "smoothness":
            pos += 1
            smx, smy = int(sm[1]), int(sm[2])
        else:
            smx, smy = max(px - 1, 0), max(py - 1, 0)
        bx = take().split()
        by = take().split()
        if bx[0] != "breakpoints_x" or by[0] != "breakpoints_y":
            raise ValueError("expected breakpoint lines")
        space = TensorSplineSpace(
            UnivariateSplineSpace([float(v) for v in bx[1:]], px, smx),
            UnivariateSplineSpace([float(v) for v in by[1:]], py, smy),
        )
        if take() != "controlpoints":
            raise ValueError("expected 'controlpoints'")
        control = np.array(
            [[float(v) for v in take().split()] for _ in range(space.dim)]
        )
        weights = None
        if pos < len(lines) and lines[pos] == "weights":
            pos += 1
            weights = np.array([float(take()) for _ in range(space.dim)])
        patches.append(GeometryMap(space, control, weights))

    explicit_interfaces = None
    boundary = {}
    while pos < len(lines):
        head = take().split()
        if head[0] == "interfaces":
            explicit_interfaces = []
            for _ in range(int(head[1])):
                a, sa, b, sb, orient = take().split()
                explicit_interfaces.append(
                    Interface(int(a), sa, int(b), sb, orient == "reversed")
                )
        elif head[0] == "boundaries":
            for _ in range(int(head[1])):
                k, side, tag = take().split()
                boundary[(int(k), side)] = tag
        else:
            raise ValueError("unexpected section %r" % head[0])

    mp = build_multipatch(patches, boundary=lambda k, s, mid: boundary.get((k, s), "dirichlet"))
    if explicit_interfaces is not None:
        detected = {i.astuple() for i in mp.interfaces}
        wanted = {i.astuple() for i in explicit_interfaces}
        if detected != wanted:
            raise TopologyError("interface section disagrees with detected interfaces")
    return mp
