"""Planar triangulations, their graph push-forwards and regularity data.

Edges are keyed by sorted vertex-index pairs and stored in lexicographic
order, so an edge of a planar triangulation and the corresponding edge of
its lifted complex share the same index.  Triangles are stored
counter-clockwise in the plane; local edge ``k`` of a triangle is the edge
opposite its local vertex ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .errors import ComplexViolation, CoverageGap, DegenerateTriangle, FoldBack

DEGENERACY_TOL = 1e-12
COVERAGE_RTOL = 1e-10
FOLDBACK_TOL = 1e-8
DEFAULT_C_STAR = 0.05


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def polygon_area(polygon):
    p = np.asarray(polygon, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def points_in_polygon(points, polygon, tol=1e-12):
    """Closed even-odd containment test; points within ``tol`` (relative to
    the polygon extent) of the boundary count as inside."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polygon, dtype=float)
    a = poly
    b = np.roll(poly, -1, axis=0)
    scale = max(np.ptp(poly[:, 0]), np.ptp(poly[:, 1]), 1.0)

    px = pts[:, None, 0]
    py = pts[:, None, 1]
    ax, ay, bx, by = a[None, :, 0], a[None, :, 1], b[None, :, 0], b[None, :, 1]
    crosses = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (py - ay) * (bx - ax) / (by - ay)
    inside = np.count_nonzero(crosses & (px < xint), axis=1) % 2 == 1

    ab = np.stack([bx - ax, by - ay], axis=-1)
    ap = np.stack([px - ax, py - ay], axis=-1)
    t = np.clip(np.sum(ap * ab, -1) / np.maximum(np.sum(ab * ab, -1), 1e-300), 0, 1)
    d = np.linalg.norm(ap - t[..., None] * ab, axis=-1).min(axis=1)
    return inside | (d <= tol * scale)


def _edge_table(triangles):
    """Lexicographically sorted unique edges plus triangle/edge incidence."""
    t = triangles
    local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)  # (T,3,2)
    keys = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        bad = edges[np.argmax(counts)]
        raise ComplexViolation(f"edge {tuple(int(i) for i in bad)} is shared by more than two triangles")
    tri_edges = inverse.reshape(-1, 3)

    edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    owner = order // 3
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_tris[sorted_edges[first], 0] = owner[first]
    edge_tris[sorted_edges[~first], 1] = owner[~first]

    # Consistently oriented neighbours traverse a shared edge in opposite
    # directions; equal directions mean the two triangles overlap.
    directed = local.reshape(-1, 2)
    _, dcounts = np.unique(directed, axis=0, return_counts=True)
    if np.any(dcounts > 1):
        raise ComplexViolation("two triangles lie on the same side of a shared edge (overlap)")
    return edges, tri_edges, edge_tris


def _check_vertex_containment(vertices, triangles):
    """Raise if a vertex lies in a closed triangle it does not belong to.

    Catches T-junctions (a vertex inside another triangle's edge), duplicated
    vertices and overlaps that contain a vertex.
    """
    tree = cKDTree(vertices)
    tri_pts = vertices[triangles]
    centers = tri_pts.mean(axis=1)
    radii = np.linalg.norm(tri_pts - centers[:, None, :], axis=2).max(axis=1) * (1 + 1e-9)
    hits = tree.query_ball_point(centers, radii)
    lens = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(hits))
    if lens.sum() == 0:
        return
    tri_idx = np.repeat(np.arange(len(triangles)), lens)
    vtx_idx = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits if h])
    own = np.any(triangles[tri_idx] == vtx_idx[:, None], axis=1)
    tri_idx, vtx_idx = tri_idx[~own], vtx_idx[~own]
    if len(tri_idx) == 0:
        return
    a, b, c = (tri_pts[tri_idx, k] for k in range(3))
    p = vertices[vtx_idx]

    def cross(u, v):
        return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]

    area2 = cross(b - a, c - a)
    l0 = cross(c - b, p - b) / area2
    l1 = cross(a - c, p - c) / area2
    l2 = 1.0 - l0 - l1
    eps = -1e-12
    inside = (l0 >= eps) & (l1 >= eps) & (l2 >= eps)
    if np.any(inside):
        i = int(np.argmax(inside))
        raise ComplexViolation(
            f"vertex {int(vtx_idx[i])} lies in triangle {int(tri_idx[i])} without being one of its vertices"
        )


@dataclass(frozen=True, eq=False)
class Triangulation2D:
    """Regular triangulation of a polygonal domain in the plane.

    Build instances with :func:`build_triangulation`, which validates the
    complex conditions; the constructor itself performs no checks.
    """

    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3), counter-clockwise
    edges: np.ndarray  # (E, 2), sorted pairs, lexicographic order
    tri_edges: np.ndarray  # (T, 3), edge index opposite each local vertex
    edge_triangles: np.ndarray  # (E, 2), -1 marks a missing neighbour
    domain: np.ndarray | None = None  # (P, 2) boundary polygon

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def midpoints(self):
        return _frozen(0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]]))

    @cached_property
    def interior(self):
        return _frozen(self.edge_triangles[:, 1] >= 0, dtype=bool)

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return _frozen(0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]))

    @cached_property
    def diameters(self):
        return _frozen(_diameters(self.vertices[self.triangles]))

    @cached_property
    def centroids(self):
        return _frozen(self.vertices[self.triangles].mean(axis=1))

    @cached_property
    def cr_gradients(self):
        """(T, 3, 2) planar gradients of the Crouzeix-Raviart basis functions.

        Entry ``[t, k]`` is the gradient of the affine function equal to 1 at
        the midpoint of local edge ``k`` and 0 at the two other midpoints,
        i.e. ``-2 * grad(lambda_k)``.
        """
        p = self.vertices[self.triangles]
        opp = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)  # P[k+2] - P[k+1]
        rot = np.stack([-opp[..., 1], opp[..., 0]], axis=-1)
        grad_lambda = rot / (2.0 * self.areas[:, None, None])
        return _frozen(-2.0 * grad_lambda)

    @property
    def size(self):
        return float(self.diameters.max())

    def edge_index(self, i, j):
        key = (min(i, j), max(i, j))
        lo = np.searchsorted(self.edges[:, 0], key[0], side="left")
        hi = np.searchsorted(self.edges[:, 0], key[0], side="right")
        k = lo + np.searchsorted(self.edges[lo:hi, 1], key[1])
        if k >= hi or tuple(self.edges[k]) != key:
            raise KeyError(key)
        return int(k)


def _diameters(pts):
    d = np.stack([pts[:, 1] - pts[:, 2], pts[:, 2] - pts[:, 0], pts[:, 0] - pts[:, 1]], axis=1)
    return np.linalg.norm(d, axis=2).max(axis=1)


def build_triangulation(vertices, triangles, domain=None) -> Triangulation2D:
    """Validate a planar triangle list and build its edge tables.

    Triangles are reordered counter-clockwise.  ``domain`` is the boundary
    polygon of U; when given, the triangles must cover it (area mismatch above
    1e-10 relative, or a vertex outside it, raises :class:`CoverageGap`).
    """
    v = np.asarray(vertices, dtype=float)
    t = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if v.ndim != 2 or v.shape[1] != 2:
        raise ValueError("vertices must have shape (V, 2)")
    if len(t) == 0:
        raise ValueError("at least one triangle is required")
    if t.min() < 0 or t.max() >= len(v):
        raise ValueError("triangle indices out of range")
    if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
        raise DegenerateTriangle("triangle with repeated vertex index")

    p = v[t]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    diam = _diameters(p)
    degenerate = np.abs(signed) <= DEGENERACY_TOL * diam**2
    if np.any(degenerate):
        i = int(np.argmax(degenerate))
        raise DegenerateTriangle(f"triangle {i} {tuple(int(k) for k in t[i])} has colinear vertices")
    cw = signed < 0
    t[cw] = t[cw][:, [0, 2, 1]]

    edges, tri_edges, edge_tris = _edge_table(t)
    _check_vertex_containment(v, t)

    dom = None
    if domain is not None:
        dom = np.asarray(domain, dtype=float)
        target = polygon_area(dom)
        total = np.abs(signed).sum()
        if abs(total - target) > COVERAGE_RTOL * target:
            raise CoverageGap(f"triangles cover area {total!r}, domain area is {target!r}")
        outside = ~points_in_polygon(v, dom)
        if np.any(outside):
            raise CoverageGap(f"vertex {int(np.argmax(outside))} lies outside the domain")

    return Triangulation2D(
        vertices=_frozen(v),
        triangles=_frozen(t, dtype=np.int64),
        edges=_frozen(edges, dtype=np.int64),
        tri_edges=_frozen(tri_edges, dtype=np.int64),
        edge_triangles=_frozen(edge_tris, dtype=np.int64),
        domain=None if dom is None else _frozen(dom),
    )


def rectangle(x0=0.0, x1=1.0, y0=0.0, y1=1.0):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def regular_polygon(sides=64, radius=0.5):
    ang = 2.0 * np.pi * np.arange(sides) / sides
    return radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def structured_mesh(domain=(0.0, 1.0, 0.0, 1.0), n=1, pattern="right") -> Triangulation2D:
    """n-by-n grid on the rectangle ``(x0, x1, y0, y1)``.

    ``right`` splits each cell along its rising diagonal into two right
    triangles; ``crisscross`` adds the cell centre and makes four.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if pattern not in ("right", "crisscross"):
        raise ValueError(f"unknown pattern {pattern!r}")
    x0, x1, y0, y1 = domain
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = [np.stack([X.ravel(), Y.ravel()], axis=1)]

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    if pattern == "right":
        tris = np.concatenate([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])
    else:
        c = (n + 1) ** 2 + np.arange(n * n)
        cx = 0.5 * (xs[i] + xs[i + 1])
        cy = 0.5 * (ys[j] + ys[j + 1])
        verts.append(np.stack([cx, cy], axis=1))
        tris = np.concatenate(
            [
                np.stack([v00, v10, c], 1),
                np.stack([v10, v11, c], 1),
                np.stack([v11, v01, c], 1),
                np.stack([v01, v00, c], 1),
            ]
        )
    return build_triangulation(np.concatenate(verts), tris, rectangle(x0, x1, y0, y1))


def polygon_disk_mesh(sides=64, radius=0.5, rings=None) -> Triangulation2D:
    """Ring mesh of the regular ``sides``-gon inscribed in a circle.

    Ring ``j`` of ``rings`` carries about ``sides * j / rings`` vertices so
    triangles stay close to isotropic; the outermost ring is the polygon.
    """
    if rings is None:
        rings = max(1, int(round(sides / (2 * np.pi))))
    counts = [max(6, int(round(sides * j / rings))) for j in range(1, rings)] + [sides]
    verts = [np.zeros((1, 2))]
    ring_ids = []
    start = 1
    for j, m in enumerate(counts, start=1):
        if j == rings:
            pts = regular_polygon(sides, radius)
        else:
            pts = regular_polygon(m, radius * j / rings)
        verts.append(pts)
        ring_ids.append(np.arange(start, start + m))
        start += m

    tris = []
    first = ring_ids[0]
    for k in range(len(first)):
        tris.append((0, first[k], first[(k + 1) % len(first)]))
    for inner, outer in zip(ring_ids[:-1], ring_ids[1:]):
        a, b = len(inner), len(outer)
        ai = 2 * np.pi * np.arange(a + 1) / a
        bo = 2 * np.pi * np.arange(b + 1) / b
        i = k = 0
        while i < a or k < b:
            if k < b and (i == a or bo[k + 1] <= ai[i + 1]):
                tris.append((inner[i % a], outer[k % b], outer[(k + 1) % b]))
                k += 1
            else:
                tris.append((inner[i % a], outer[k % b], inner[(i + 1) % a]))
                i += 1
    return build_triangulation(np.concatenate(verts), tris, regular_polygon(sides, radius))


def refine_uniform(t: Triangulation2D) -> Triangulation2D:
    """Split every triangle into four similar children through its edge
    midpoints."""
    nv = t.n_vertices
    verts = np.concatenate([t.vertices, t.midpoints])
    a, b, c = t.triangles.T
    ma, mb, mc = (nv + t.tri_edges[:, k] for k in range(3))
    tris = np.concatenate(
        [
            np.stack([a, mc, mb], 1),
            np.stack([mc, b, ma], 1),
            np.stack([mb, ma, c], 1),
            np.stack([ma, mb, mc], 1),
        ]
    )
    return build_triangulation(verts, tris, t.domain)


@dataclass(frozen=True)
class RegularityReport:
    size_h: float
    c_star: float
    worst_triangle: int
    threshold: float = DEFAULT_C_STAR

    @property
    def is_regular(self):
        return self.c_star >= self.threshold


def regularity(t, threshold=DEFAULT_C_STAR) -> RegularityReport:
    """Smallest area/diameter^2 ratio and mesh size.

    Works for planar triangulations and lifted complexes alike (the latter
    use lifted areas and diameters).
    """
    ratio = np.abs(t.areas) / t.diameters**2
    worst = int(np.argmin(ratio))
    return RegularityReport(
        size_h=float(t.diameters.max()),
        c_star=float(ratio[worst]),
        worst_triangle=worst,
        threshold=threshold,
    )


def circumcenter(a, b, c):
    """Circumcenter of a triangle in R^3 (or R^2), in the triangle's plane."""
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    squeeze = a.ndim == 1
    a, b, c = np.atleast_2d(a), np.atleast_2d(b), np.atleast_2d(c)
    if a.shape[-1] == 2:
        pad = lambda x: np.concatenate([x, np.zeros((len(x), 1))], axis=1)  # noqa: E731
        out = circumcenter(pad(a), pad(b), pad(c))
        out = np.atleast_2d(out)[:, :2]
        return out[0] if squeeze else out
    u, v = a - c, b - c
    w = np.cross(u, v)
    ww = np.sum(w * w, axis=1)
    scale = np.maximum(np.sum(u * u, axis=1), np.sum(v * v, axis=1))
    if np.any(ww <= (DEGENERACY_TOL * scale) ** 2):
        raise DegenerateTriangle("circumcenter of a degenerate triangle")
    num = np.cross(np.sum(u * u, 1)[:, None] * v - np.sum(v * v, 1)[:, None] * u, w)
    out = c + num / (2.0 * ww[:, None])
    return out[0] if squeeze else out


@dataclass(frozen=True, eq=False)
class TriangularComplex3D:
    """Triangular complex in R^3 sharing the connectivity of a planar mesh.

    For graph complexes (``base`` and ``nodal_values`` set) every normal has
    positive third component.  Complexes obtained by rigid motions of a graph
    complex keep the orientation induced by the vertex order and drop the
    planar data.
    """

    vertices: np.ndarray  # (V, 3)
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    edge_triangles: np.ndarray
    base: Triangulation2D | None = None
    nodal_values: np.ndarray | None = None

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def is_graph(self):
        return self.base is not None

    @cached_property
    def interior(self):
        return _frozen(self.edge_triangles[:, 1] >= 0, dtype=bool)

    @cached_property
    def _cross(self):
        p = self.vertices[self.triangles]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def areas(self):
        return _frozen(0.5 * np.linalg.norm(self._cross, axis=1))

    @cached_property
    def normals(self):
        return _frozen(self._cross / np.linalg.norm(self._cross, axis=1)[:, None])

    @cached_property
    def diameters(self):
        return _frozen(_diameters(self.vertices[self.triangles]))

    @cached_property
    def centroids(self):
        return _frozen(self.vertices[self.triangles].mean(axis=1))

    @cached_property
    def midpoints(self):
        return _frozen(0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]]))

    @cached_property
    def edge_vectors(self):
        """Lifted edge vectors, oriented from the lower to the higher index."""
        return _frozen(self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]])

    @cached_property
    def edge_lengths(self):
        return _frozen(np.linalg.norm(self.edge_vectors, axis=1))

    @cached_property
    def tangents(self):
        return _frozen(self.edge_vectors / self.edge_lengths[:, None])

    @cached_property
    def apriori_normals(self):
        """n0(e): normalized mean of the incident normals on interior edges,
        the single incident normal on boundary edges."""
        k0, k1 = self.edge_triangles.T
        n = self.normals[k0].copy()
        inner = k1 >= 0
        s = n[inner] + self.normals[k1[inner]]
        norm = np.linalg.norm(s, axis=1)
        if np.any(norm < FOLDBACK_TOL):
            e = int(np.flatnonzero(inner)[np.argmin(norm)])
            raise FoldBack(f"antipodal normals across edge {tuple(int(i) for i in self.edges[e])}")
        n[inner] = s / norm[:, None]
        return _frozen(n)

    @cached_property
    def cr_gradients(self):
        """(T, 3, 3) tangential gradients of the Crouzeix-Raviart basis
        functions on each lifted triangle."""
        p = self.vertices[self.triangles]
        opp = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
        nbar = self.normals[:, None, :]
        grad_lambda = np.cross(nbar, opp) / (2.0 * self.areas[:, None, None])
        return _frozen(-2.0 * grad_lambda)

    @cached_property
    def jacobians(self):
        """(T, 3, 2) matrices [[1,0],[0,1],[du/dx, du/dy]] of the lifting map
        restricted to each triangle."""
        if self.base is None:
            raise ValueError("jacobians are only defined for graph complexes")
        g = self.base.cr_gradients  # any spanning set works; use barycentric data
        u = self.nodal_values[self.triangles]
        # grad u_h = sum_k u_k grad(lambda_k) and grad(lambda_k) = -g_k / 2
        grad_u = np.einsum("tk,tkd->td", u, -0.5 * g)
        J = np.zeros((self.n_triangles, 3, 2))
        J[:, 0, 0] = 1.0
        J[:, 1, 1] = 1.0
        J[:, 2, :] = grad_u
        return _frozen(J)

    @property
    def grad_u(self):
        return self.jacobians[:, 2, :]

    def edge_key(self, e):
        return tuple(int(i) for i in self.edges[e])

    def transformed(self, rotation=None, translation=None, scale=1.0):
        """Image under x -> scale * R x + t (planar data is dropped)."""
        R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)
        return TriangularComplex3D(
            vertices=_frozen(scale * self.vertices @ R.T + t),
            triangles=self.triangles,
            edges=self.edges,
            tri_edges=self.tri_edges,
            edge_triangles=self.edge_triangles,
        )


def push_forward(t: Triangulation2D, u_nodal) -> TriangularComplex3D:
    """Lift a planar triangulation onto the graph of the piecewise affine
    interpolant of ``u_nodal``."""
    u = np.asarray(u_nodal, dtype=float).reshape(-1)
    if len(u) != t.n_vertices:
        raise ValueError(f"expected {t.n_vertices} nodal values, got {len(u)}")
    cx = TriangularComplex3D(
        vertices=_frozen(np.column_stack([t.vertices, u])),
        triangles=t.triangles,
        edges=t.edges,
        tri_edges=t.tri_edges,
        edge_triangles=t.edge_triangles,
        base=t,
        nodal_values=_frozen(u),
    )
    cx.apriori_normals  # noqa: B018 - raises FoldBack eagerly
    return cx


def flat_complex(t: Triangulation2D) -> TriangularComplex3D:
    return push_forward(t, np.zeros(t.n_vertices))
