"""Discrete, continuous and finite-difference curvature energies.

The discrete energy sums, over the triangles of a complex, the integral of
``f(x, nbar, Dn)`` where ``nbar`` and ``Dn`` are constant per triangle.  The
continuous energy of a graph integrates the same density in parameter space
with the area factor sqrt(1 + |grad u|^2).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .directors import DirectorField, gauss_map, gauss_map_jacobian, shape_operators
from .errors import DegenerateDual
from .mesh import Triangulation2D, TriangularComplex3D, circumcenter, regularity
from .quadrature import physical_points
from .surfaces import AnalyticGraph  # noqa: F401  (re-exported)

CHUNK = 4096
DUAL_TOL = 1e-12


@dataclass(frozen=True)
class Integrand:
    """Density f(x, n, A) with x in R^3, n in S^2 and A a 3x3 matrix.

    ``f`` and ``grad_A`` are vectorized: x (N, 3), n (N, 3), A (N, 3, 3).
    ``weight`` is set for densities of the form w(x) |A|^2, which the
    pseudo-unit solver minimizes exactly.
    """

    name: str
    f: Callable
    p: float
    coercivity: float = 1.0
    grad_A: Callable | None = None
    weight: Callable | None = None
    x_dependent: bool = False
    n_dependent: bool = False
    convex_in_A: bool = True
    quadratic_in_A: bool = False
    assumption_violating: bool = False
    params: dict = field(default_factory=dict)

    def __call__(self, x, n, A):
        return self.f(x, n, A)

    def gradient(self, x, n, A, step=1e-6):
        """df/dA, (N, 3, 3); central differences when no closed form is set."""
        if self.grad_A is not None:
            return self.grad_A(x, n, A)
        A = np.asarray(A, dtype=float)
        G = np.empty_like(A)
        h = step * np.maximum(1.0, np.linalg.norm(A, axis=(1, 2)))
        for i in range(3):
            for j in range(3):
                d = np.zeros_like(A)
                d[:, i, j] = h
                G[:, i, j] = (self.f(x, n, A + d) - self.f(x, n, A - d)) / (2 * h)
        return G


def _frob2(A):
    return np.einsum("nij,nij->n", A, A)


def willmore() -> Integrand:
    return Integrand(
        name="willmore",
        f=lambda x, n, A: _frob2(A),
        grad_A=lambda x, n, A: 2.0 * A,
        weight=lambda x: np.ones(len(x)),
        p=2.0,
        quadratic_in_A=True,
    )


def p_willmore(p=2.0) -> Integrand:
    if not p > 1:
        raise ValueError("growth exponent must exceed 1")

    def f(x, n, A):
        return _frob2(A) ** (p / 2)

    def grad(x, n, A):
        r2 = _frob2(A)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(r2 > 0, p * r2 ** (p / 2 - 1), 0.0)
        return c[:, None, None] * A

    return Integrand(
        name=f"p_willmore[{p:g}]",
        f=f,
        grad_A=grad,
        p=float(p),
        quadratic_in_A=p == 2,
        weight=(lambda x: np.ones(len(x))) if p == 2 else None,
        params={"p": float(p)},
    )


def weighted_willmore(omega: Callable, lower_bound: float, name="weighted_willmore") -> Integrand:
    """omega(x) |A|^2 with omega >= lower_bound > 0 on the surfaces used."""
    if lower_bound <= 0:
        raise ValueError("weight lower bound must be positive")
    return Integrand(
        name=name,
        f=lambda x, n, A: omega(x) * _frob2(A),
        grad_A=lambda x, n, A: 2.0 * omega(x)[:, None, None] * A,
        weight=omega,
        p=2.0,
        coercivity=lower_bound,
        x_dependent=True,
        quadratic_in_A=True,
    )


def default_weight(x):
    """1 + |x|^2 / 2, the weight used by the ``weighted_willmore`` preset."""
    return 1.0 + 0.5 * np.sum(x * x, axis=1)


def spontaneous_curvature(h0=0.0) -> Integrand:
    """(tr A - h0)^2.  Not coercive in the full matrix, so it violates the
    growth assumption; provided for experiments only."""

    def f(x, n, A):
        return (np.trace(A, axis1=1, axis2=2) - h0) ** 2

    def grad(x, n, A):
        t = np.trace(A, axis1=1, axis2=2) - h0
        return 2.0 * t[:, None, None] * np.eye(3)[None]

    return Integrand(
        name="spontaneous_curvature",
        f=f,
        grad_A=grad,
        p=2.0,
        coercivity=0.0,
        assumption_violating=True,
        params={"h0": h0},
    )


def integrand_by_name(name, p=2.0, h0=0.0, allow_violating=False) -> Integrand:
    if name == "willmore":
        return willmore()
    if name == "p_willmore":
        return p_willmore(p)
    if name == "weighted_willmore":
        return weighted_willmore(default_weight, 1.0)
    if name == "spontaneous_curvature":
        if not allow_violating:
            raise ValueError("spontaneous_curvature violates the coercivity assumption; pass allow_violating")
        return spontaneous_curvature(h0)
    raise KeyError(f"unknown integrand {name!r}")


INTEGRANDS = ("willmore", "p_willmore", "weighted_willmore", "spontaneous_curvature")


def check_assumptions(integrand: Integrand, samples=200, seed=0):
    """Spot-check coercivity f >= c |A|^p and midpoint convexity in A.

    Returns (coercive, convex) booleans.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(samples, 3))
    n = rng.normal(size=(samples, 3))
    n /= np.linalg.norm(n, axis=1)[:, None]
    A = rng.normal(size=(samples, 3, 3)) * rng.exponential(size=(samples, 1, 1))
    B = rng.normal(size=(samples, 3, 3))
    fa = integrand(x, n, A)
    coercive = integrand.coercivity > 0 and bool(np.all(fa >= integrand.coercivity * np.linalg.norm(A, axis=(1, 2)) ** integrand.p * (1 - 1e-12)))
    mid = integrand(x, n, 0.5 * (A + B))
    convex = bool(np.all(mid <= 0.5 * (fa + integrand(x, n, B)) + 1e-12 * (1 + np.abs(fa))))
    return coercive, convex


@dataclass(frozen=True)
class EnergyReport:
    total: float
    per_triangle: np.ndarray
    size_h: float
    c_star: float
    quad_order: int
    integrand: str
    kind: str = "discrete"

    def as_dict(self, per_triangle=False):
        d = {
            "format": "helfrich-disc v1",
            "kind": self.kind,
            "integrand": self.integrand,
            "h": self.size_h,
            "c_star": self.c_star,
            "total": self.total,
            "quad_order": self.quad_order,
        }
        if per_triangle:
            d["per_triangle"] = [float(v) for v in self.per_triangle]
        return d


def _chunked(fn, n, workers):
    """Apply ``fn(slice)`` over fixed-size index chunks and concatenate in
    order.  Chunk boundaries do not depend on ``workers``, so results are
    bitwise identical for any thread count."""
    slices = [slice(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]
    if workers and workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, slices))
    else:
        parts = [fn(s) for s in slices]
    return np.concatenate(parts) if parts else np.zeros(0)


def triangle_energies(cx: TriangularComplex3D, Dn, integrand: Integrand, quad_order=4, workers=1):
    """Per-triangle contributions for given shape operators (T, 3, 3)."""
    areas, normals = cx.areas, cx.normals

    if not integrand.x_dependent:

        def part(s):
            return areas[s] * integrand(cx.centroids[s], normals[s], Dn[s])

    else:
        corners = cx.vertices[cx.triangles]

        def part(s):
            pts, w = physical_points(corners[s], quad_order)
            t, q = pts.shape[:2]
            rep = lambda a: np.repeat(a, q, axis=0)  # noqa: E731
            vals = integrand(pts.reshape(-1, 3), rep(normals[s]), rep(Dn[s])).reshape(t, q)
            return areas[s] * (vals @ w)

    return _chunked(part, cx.n_triangles, workers)


def triangle_energy_gradients(cx: TriangularComplex3D, Dn, integrand: Integrand, quad_order=4):
    """d(contribution_k)/d(Dn_k), shape (T, 3, 3)."""
    areas, normals = cx.areas, cx.normals
    if not integrand.x_dependent:
        return areas[:, None, None] * integrand.gradient(cx.centroids, normals, Dn)
    pts, w = physical_points(cx.vertices[cx.triangles], quad_order)
    t, q = pts.shape[:2]
    G = integrand.gradient(pts.reshape(-1, 3), np.repeat(normals, q, 0), np.repeat(Dn, q, 0)).reshape(t, q, 3, 3)
    return areas[:, None, None] * np.einsum("tqij,q->tij", G, w)


def discrete_energy(cx: TriangularComplex3D, field: DirectorField, integrand: Integrand, quad_order=4, workers=1) -> EnergyReport:
    """Sum over triangles of the integral of f(x, nbar, Dn).

    For x-independent densities the integrand is constant per triangle and
    area * f is used directly, whatever ``quad_order``.
    """
    physical_points(cx.vertices[cx.triangles[:1]], quad_order)  # validates the order
    per = triangle_energies(cx, shape_operators(field), integrand, quad_order, workers)
    reg = regularity(cx)
    return EnergyReport(float(np.sum(per)), per, reg.size_h, reg.c_star, quad_order, integrand.name)


def _pinv_J(p):
    """Moore-Penrose left inverse (J^T J)^-1 J^T of J = [[1,0],[0,1],[p1,p2]].

    J^T J = I + p p^T, so by Sherman-Morrison the result is
    [I - p p^T / s2 | p / s2] with s2 = 1 + |p|^2.
    """
    p = np.asarray(p, dtype=float)
    s2 = 1.0 + np.sum(p * p, axis=1)
    out = np.empty((len(p), 2, 3))
    out[:, :, :2] = np.eye(2) - p[:, :, None] * p[:, None, :] / s2[:, None, None]
    out[:, :, 2] = p / s2[:, None]
    return out


def graph_integrand_F(integrand: Integrand, x, z, p, xi):
    """The density in parameter space: f((x, z), n(p), xi pinv(J(p))) * sqrt(1 + |p|^2).

    Vectorized over leading axes: x (N, 2), z (N,), p (N, 2), xi (N, 3, 2).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    xi = np.asarray(xi, dtype=float).reshape(-1, 3, 2)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    A = np.matmul(xi, _pinv_J(p))
    pts = np.column_stack([x, z])
    return integrand(pts, gauss_map(p), A) * np.sqrt(1.0 + np.sum(p * p, axis=1))


def normal_gradient(surface, x):
    """grad(n(grad u)) = Dn(grad u) @ hess u at points x, shape (N, 3, 2)."""
    return np.matmul(gauss_map_jacobian(surface.grad_u(x)), surface.hess_u(x))


def continuous_energy(surface, integrand: Integrand, quad_order, quad_mesh: Triangulation2D) -> EnergyReport:
    """Integral over U of the graph density, by triangle quadrature."""
    pts, w = physical_points(quad_mesh.vertices[quad_mesh.triangles], quad_order)
    t, q = pts.shape[:2]
    x = pts.reshape(-1, 2)
    vals = graph_integrand_F(integrand, x, surface.u(x), surface.grad_u(x), normal_gradient(surface, x))
    per = np.abs(quad_mesh.areas) * (vals.reshape(t, q) @ w)
    reg = regularity(quad_mesh)
    return EnergyReport(float(np.sum(per)), per, reg.size_h, reg.c_star, quad_order, integrand.name, "continuous")


def fd_energy(cx: TriangularComplex3D) -> EnergyReport:
    """Finite-difference bending energy: the sum over interior edges of
    (l / d) |nbar - nbar'|^2, where d is the distance between the circumcenters
    of the two lifted triangles."""
    inner = np.flatnonzero(cx.interior)
    k0, k1 = cx.edge_triangles[inner].T
    corners = cx.vertices[cx.triangles]
    cc = circumcenter(corners[:, 0], corners[:, 1], corners[:, 2])
    d = np.linalg.norm(cc[k0] - cc[k1], axis=1)
    l = cx.edge_lengths[inner]
    if np.any(d <= DUAL_TOL * l):
        e = inner[int(np.argmin(d / l))]
        raise DegenerateDual(f"coincident circumcenters across edge {cx.edge_key(e)}")
    jump = np.sum((cx.normals[k0] - cx.normals[k1]) ** 2, axis=1)
    per_edge = l / d * jump
    per = np.zeros(cx.n_triangles)
    np.add.at(per, k0, 0.5 * per_edge)
    np.add.at(per, k1, 0.5 * per_edge)
    reg = regularity(cx)
    return EnergyReport(float(np.sum(per_edge)), per, reg.size_h, reg.c_star, 0, "fd_willmore", "fd")
