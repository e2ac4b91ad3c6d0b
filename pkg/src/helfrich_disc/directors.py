"""Edge director fields and their Crouzeix-Raviart interpolants.

A director field assigns a vector to every edge.  Restricted to a triangle it
is interpolated affinely between the three edge midpoints; the (constant)
tangential gradient of that interpolant is the discrete shape operator
``Dn`` (3x3, killing the triangle normal) and, on graph complexes, its
parameter-space gradient ``grad_n`` (3x2) satisfies ``Dn @ J = grad_n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstraintViolation,
    DegenerateProjection,
    FoldBack,
    LemmaViolation,
    OrientationViolation,
)
from .mesh import FOLDBACK_TOL, TriangularComplex3D

UNIT = "unit"
PSEUDO_UNIT = "pseudo_unit"
FAMILIES = (UNIT, PSEUDO_UNIT)

CONSTRAINT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DirectorField:
    complex: TriangularComplex3D
    values: np.ndarray  # (E, 3)
    family: str = UNIT

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown director family {self.family!r}")
        v = np.array(self.values, dtype=float)
        if v.shape != (self.complex.n_edges, 3):
            raise ValueError(f"expected values of shape ({self.complex.n_edges}, 3), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def constraint_residuals(self):
        """Per-edge residuals of the family constraints (0 means satisfied).

        Returns a dict of (E,) arrays.  Inequalities report the amount of
        violation.
        """
        cx = self.complex
        n = self.values
        out = {"tangency": np.abs(np.sum(n * cx.tangents, axis=1))}
        k0, k1 = cx.edge_triangles.T
        side0 = np.sum(n * cx.normals[k0], axis=1)
        side1 = np.where(k1 >= 0, np.sum(n * cx.normals[np.maximum(k1, 0)], axis=1), np.inf)
        orient = np.maximum(0.0, -np.minimum(side0, side1))
        norm_dev = np.abs(np.linalg.norm(n, axis=1) - 1.0)
        if self.family == UNIT:
            out["unit_norm"] = norm_dev
            out["orientation"] = orient
        else:
            inner = cx.interior
            out["pseudo_unit"] = np.where(inner, np.abs(np.sum(n * cx.apriori_normals, axis=1) - 1.0), 0.0)
            out["unit_norm"] = np.where(inner, 0.0, norm_dev)
            out["orientation"] = np.where(inner, 0.0, orient)
        return out

    def violations(self, tol=CONSTRAINT_TOL):
        """List of (constraint, edge key, residual) above ``tol``."""
        found = []
        for name, res in self.constraint_residuals().items():
            for e in np.flatnonzero(res > tol):
                found.append((name, self.complex.edge_key(e), float(res[e])))
        return found

    def validate(self, tol=CONSTRAINT_TOL):
        bad = self.violations(tol)
        if bad:
            name, key, res = bad[0]
            raise ConstraintViolation(
                f"{len(bad)} constraint violation(s); first: {name} on edge {key} (residual {res:.3e})",
                edge_key=key,
            )
        return self


@dataclass(frozen=True)
class TriangleAffineField:
    triangle: int
    value_at_centroid: np.ndarray
    centroid: np.ndarray  # lifted centroid (3,)
    grad_shape: np.ndarray  # Dn, (3, 3)
    grad_planar: np.ndarray | None = None  # grad_n, (3, 2)
    planar_centroid: np.ndarray | None = None

    def __call__(self, point):
        """Evaluate at a point of the lifted triangle's plane."""
        return self.value_at_centroid + self.grad_shape @ (np.asarray(point, dtype=float) - self.centroid)

    def at_planar(self, x):
        """Evaluate at a parameter point x in U (graph complexes only)."""
        return self.value_at_centroid + self.grad_planar @ (np.asarray(x, dtype=float) - self.planar_centroid)


def shape_operators(field: DirectorField):
    """Dn for every triangle, shape (T, 3, 3)."""
    cx = field.complex
    vals = field.values[cx.tri_edges]  # (T, 3, 3): [t, k] = value on local edge k
    return np.einsum("tki,tkj->tij", vals, cx.cr_gradients)


def planar_gradients(field: DirectorField):
    """grad_n for every triangle, shape (T, 3, 2)."""
    cx = field.complex
    if cx.base is None:
        raise ValueError("planar gradients need a graph complex")
    vals = field.values[cx.tri_edges]
    return np.einsum("tki,tkj->tij", vals, cx.base.cr_gradients)


def cr_interpolate(field: DirectorField, k: int) -> TriangleAffineField:
    cx = field.complex
    vals = field.values[cx.tri_edges[k]]
    Dn = np.einsum("ki,kj->ij", vals, cx.cr_gradients[k])
    kw = {}
    if cx.base is not None:
        kw["grad_planar"] = np.einsum("ki,kj->ij", vals, cx.base.cr_gradients[k])
        kw["planar_centroid"] = cx.base.centroids[k]
    return TriangleAffineField(
        triangle=int(k),
        value_at_centroid=vals.mean(axis=0),
        centroid=cx.centroids[k],
        grad_shape=Dn,
        **kw,
    )


def gauss_map(p):
    """Upward unit normal of a graph whose gradient is ``p``.

    Accepts a single 2-vector or an (N, 2) array.
    """
    p = np.asarray(p, dtype=float)
    q = np.atleast_2d(p)
    n = np.column_stack([-q, np.ones(len(q))]) / np.sqrt(1.0 + np.sum(q * q, axis=1))[:, None]
    return n[0] if p.ndim == 1 else n


def gauss_map_jacobian(p):
    """(N, 3, 2) derivative of :func:`gauss_map` with respect to p."""
    q = np.atleast_2d(np.asarray(p, dtype=float))
    s2 = 1.0 + np.sum(q * q, axis=1)
    s = np.sqrt(s2)
    D = np.zeros((len(q), 3, 2))
    D[:, 0, 0] = D[:, 1, 1] = -1.0
    D /= s[:, None, None]
    num = np.column_stack([-q, np.ones(len(q))])
    D -= num[:, :, None] * q[:, None, :] / (s2 * s)[:, None, None]
    return D


def constant_field(cx: TriangularComplex3D, vector, family=UNIT) -> DirectorField:
    return DirectorField(cx, np.tile(np.asarray(vector, dtype=float), (cx.n_edges, 1)), family)


def apriori_field(cx: TriangularComplex3D, family=PSEUDO_UNIT) -> DirectorField:
    """n0 on every edge; admissible for both families."""
    return DirectorField(cx, cx.apriori_normals, family)


def recovery_director(cx: TriangularComplex3D, surface) -> DirectorField:
    """Closest unit vector orthogonal to each lifted edge, measured from the
    exact normal at the edge midpoint.

    On the great circle {w in S^2 : w . E = 0} the point nearest to v is the
    normalized projection of v onto the plane orthogonal to E, which is what
    is computed here.
    """
    if cx.base is None:
        raise ValueError("recovery directors need a graph complex")
    v = gauss_map(surface.grad_u(cx.base.midpoints))
    E = cx.tangents
    proj = v - np.sum(v * E, axis=1)[:, None] * E
    norm = np.linalg.norm(proj, axis=1)
    if np.any(norm < 1e-8):
        e = int(np.argmin(norm))
        raise DegenerateProjection(f"exact normal parallel to edge {cx.edge_key(e)}")
    n = proj / norm[:, None]

    k0, k1 = cx.edge_triangles.T
    side = np.minimum(
        np.sum(n * cx.normals[k0], axis=1),
        np.where(k1 >= 0, np.sum(n * cx.normals[np.maximum(k1, 0)], axis=1), np.inf),
    )
    if np.any(side < -CONSTRAINT_TOL):
        e = int(np.argmin(side))
        raise OrientationViolation(f"recovery director on edge {cx.edge_key(e)} points away from a triangle")
    return DirectorField(cx, n, UNIT)


def edge_frames(cx: TriangularComplex3D):
    """Orthonormal frames (n0(e), w(e)) with w = tau x n0, both (E, 3).

    Unit directors are cos(t) n0 + sin(t) w; pseudo-unit directors are
    n0 + s w.
    """
    n0 = cx.apriori_normals
    w = np.cross(cx.tangents, n0)
    return n0, w


def angle_parametrize(cx: TriangularComplex3D, e: int):
    if not cx.interior[e]:
        raise ValueError(f"edge {cx.edge_key(e)} is a boundary edge")
    k0, k1 = cx.edge_triangles[e]
    if np.linalg.norm(cx.normals[k0] + cx.normals[k1]) < FOLDBACK_TOL:
        raise FoldBack(f"antipodal normals across edge {cx.edge_key(e)}")
    n0, w = edge_frames(cx)
    return n0[e], w[e]


def feasible_half_width(cx: TriangularComplex3D):
    """Half-width of the feasible angle arc around n0 for unit directors.

    The incident normals sit at angles +-phi from n0 in the (n0, w) plane,
    so n . nbar >= 0 on both sides iff |t| <= pi/2 - |phi|.
    """
    n0, w = edge_frames(cx)
    nb = cx.normals[cx.edge_triangles[:, 0]]
    phi = np.arctan2(np.sum(nb * w, axis=1), np.sum(nb * n0, axis=1))
    return 0.5 * np.pi - np.abs(phi)


def unit_from_angles(cx, theta):
    n0, w = edge_frames(cx)
    return DirectorField(cx, np.cos(theta)[:, None] * n0 + np.sin(theta)[:, None] * w, UNIT)


def angles_of(field: DirectorField):
    n0, w = edge_frames(field.complex)
    return np.arctan2(np.sum(field.values * w, axis=1), np.sum(field.values * n0, axis=1))


def pseudo_from_offsets(cx, s, boundary_values=None):
    """n0 + s w on interior edges; boundary edges take ``boundary_values``
    (default n0, i.e. the incident triangle normal)."""
    n0, w = edge_frames(cx)
    vals = n0 + np.asarray(s, dtype=float)[:, None] * w
    inner = cx.interior
    if boundary_values is None:
        vals[~inner] = n0[~inner]
    else:
        vals[~inner] = np.asarray(boundary_values)[~inner]
    return DirectorField(cx, vals, PSEUDO_UNIT)


def pseudo_projection(field: DirectorField) -> DirectorField:
    """Rescale interior directors onto the plane n . n0 = 1; boundary
    directors are kept."""
    cx = field.complex
    n0 = cx.apriori_normals
    dots = np.sum(field.values * n0, axis=1)
    inner = cx.interior
    if np.any(dots[inner] <= 0):
        raise DegenerateProjection("director orthogonal to or opposite its a-priori normal")
    vals = field.values.copy()
    vals[inner] /= dots[inner][:, None]
    return DirectorField(cx, vals, PSEUDO_UNIT)


@dataclass(frozen=True)
class RatioStats:
    max: float
    mean: float
    argmax: tuple | None  # (edge key, triangle)
    count: int  # ratios evaluated
    vacuous: int  # pairs with Dn = 0
    skipped: int = 0  # pairs failing the smallness hypothesis

    def as_dict(self):
        return {
            "max": self.max,
            "mean": self.mean,
            "argmax": None if self.argmax is None else [list(self.argmax[0]), self.argmax[1]],
            "count": self.count,
            "vacuous": self.vacuous,
            "skipped": self.skipped,
        }


def _edge_triangle_pairs(cx):
    e = np.repeat(np.arange(cx.n_edges), 2)
    k = cx.edge_triangles.reshape(-1)
    keep = k >= 0
    return e[keep], k[keep]


def _stats(cx, ratio, e, k, vacuous, skipped=0):
    if len(ratio) == 0:
        return RatioStats(0.0, 0.0, None, 0, vacuous, skipped)
    i = int(np.argmax(ratio))
    # fixed summation order keeps the mean reproducible bit for bit
    return RatioStats(float(ratio[i]), float(np.sum(ratio) / len(ratio)), (cx.edge_key(e[i]), int(k[i])), len(ratio), vacuous, skipped)


def check_normal_estimate(field: DirectorField, zero_tol=1e-12, tol=CONSTRAINT_TOL) -> RatioStats:
    """Ratios |n(e) - nbar(k)| / (diam(k) |Dn_k|) over edge/triangle pairs.

    Pairs on triangles with Dn = 0 must have n(e) = nbar(k); otherwise
    :class:`LemmaViolation` is raised.
    """
    cx = field.complex
    norms = np.linalg.norm(shape_operators(field), axis=(1, 2))
    e, k = _edge_triangle_pairs(cx)
    num = np.linalg.norm(field.values[e] - cx.normals[k], axis=1)
    den = cx.diameters[k] * norms[k]
    zero = den <= zero_tol
    if np.any(num[zero] > tol):
        i = int(np.flatnonzero(zero)[np.argmax(num[zero])])
        raise LemmaViolation(f"Dn vanishes on triangle {int(k[i])} but n{cx.edge_key(e[i])} differs from its normal")
    live = ~zero
    return _stats(cx, num[live] / den[live], e[live], k[live], int(zero.sum()))


def check_pseudo_estimate(field: DirectorField, threshold=0.5, zero_tol=1e-12) -> RatioStats:
    """Ratios |n(e) - nbar(k)| / (diam(k) (|Dn_k| + |Dn_k'|)) on interior
    edges where the smallness hypothesis diam(k)(|Dn_k| + |Dn_k'|) < threshold
    holds.  Edges failing the hypothesis are only counted."""
    cx = field.complex
    norms = np.linalg.norm(shape_operators(field), axis=(1, 2))
    inner = np.flatnonzero(cx.interior)
    k0, k1 = cx.edge_triangles[inner].T
    pair_norm = norms[k0] + norms[k1]
    e = np.concatenate([inner, inner])
    k = np.concatenate([k0, k1])
    den = cx.diameters[k] * np.concatenate([pair_norm, pair_norm])
    num = np.linalg.norm(field.values[e] - cx.normals[k], axis=1)
    zero = den <= zero_tol
    ok = ~zero & (den < threshold)
    skipped = int(np.count_nonzero(~zero & ~ok))
    return _stats(cx, num[ok] / den[ok], e[ok], k[ok], int(zero.sum()), skipped)
