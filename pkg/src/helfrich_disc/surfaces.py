"""Analytic benchmark graphs with closed-form derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import mesh
from .errors import OutOfDomain


@dataclass(frozen=True)
class AnalyticGraph:
    """Graph surface z = u(x, y) over a polygonal domain.

    ``u``, ``grad_u`` and ``hess_u`` act on point arrays of shape (N, 2) and
    return (N,), (N, 2) and (N, 2, 2) arrays.
    """

    name: str
    u: Callable
    grad_u: Callable
    hess_u: Callable
    domain: np.ndarray
    lipschitz: float
    mesh_kind: str = "rectangle"  # or "polygon"
    bounds: tuple = (0.0, 1.0, 0.0, 1.0)
    affine: bool = False
    # (integrand name, value, provenance note)
    references: tuple = field(default_factory=tuple)

    def mesh(self, n, pattern="right") -> mesh.Triangulation2D:
        """A mesh of the domain at resolution level ``n``.

        Rectangles get an n-by-n structured mesh.  The polygonal disk starts
        from its ring mesh and is refined uniformly log2(n / 8) times, so the
        sizes halve along the same n = 8, 16, 32, ... ladder.
        """
        if self.mesh_kind == "rectangle":
            return mesh.structured_mesh(self.bounds, n, pattern)
        sides = len(self.domain)
        radius = float(np.linalg.norm(self.domain[0]))
        t = mesh.polygon_disk_mesh(sides, radius)
        levels = int(round(np.log2(max(n, 8) / 8)))
        for _ in range(levels):
            t = mesh.refine_uniform(t)
        return t


def nodal_sample(entry: AnalyticGraph, t: mesh.Triangulation2D, tol=1e-12):
    """Exact values of ``u`` at the vertices of ``t``."""
    inside = mesh.points_in_polygon(t.vertices, entry.domain, tol=tol)
    if not np.all(inside):
        raise OutOfDomain(f"vertex {int(np.argmin(inside))} lies outside the domain of {entry.name}")
    return entry.u(t.vertices)


def _plane(a=(0.3, -0.2), b=0.1, name="plane", bounds=(-0.5, 0.5, -0.5, 0.5)):
    a = np.asarray(a, dtype=float)
    return AnalyticGraph(
        name=name,
        u=lambda x: x @ a + b,
        grad_u=lambda x: np.broadcast_to(a, x.shape).copy(),
        hess_u=lambda x: np.zeros((len(x), 2, 2)),
        domain=mesh.rectangle(*bounds),
        lipschitz=float(np.linalg.norm(a)),
        bounds=bounds,
        affine=True,
        references=(("willmore", 0.0, "affine graph has no curvature"),),
    )


def _paraboloid(bounds=(-0.5, 0.5, -0.5, 0.5)):
    return AnalyticGraph(
        name="paraboloid",
        u=lambda x: 0.5 * np.sum(x * x, axis=1),
        grad_u=lambda x: x.copy(),
        hess_u=lambda x: np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy(),
        domain=mesh.rectangle(*bounds),
        lipschitz=float(np.hypot(bounds[1], bounds[3])),
        bounds=bounds,
    )


def _saddle(bounds=(-0.5, 0.5, -0.5, 0.5)):
    D = np.diag([1.0, -1.0])
    return AnalyticGraph(
        name="saddle",
        u=lambda x: 0.5 * (x[:, 0] ** 2 - x[:, 1] ** 2),
        grad_u=lambda x: x * np.array([1.0, -1.0]),
        hess_u=lambda x: np.broadcast_to(D, (len(x), 2, 2)).copy(),
        domain=mesh.rectangle(*bounds),
        lipschitz=float(np.hypot(bounds[1], bounds[3])),
        bounds=bounds,
    )


def _sphere_cap(R=1.0, radius=0.5, sides=64):
    def u(x):
        return np.sqrt(R * R - np.sum(x * x, axis=1))

    def grad(x):
        return -x / u(x)[:, None]

    def hess(x):
        z = u(x)
        return -np.eye(2)[None] / z[:, None, None] - np.einsum("ni,nj->nij", x, x) / (z**3)[:, None, None]

    disk = 4.0 * np.pi * R * (R - np.sqrt(R * R - radius * radius)) if R == 1.0 else None
    refs = (("willmore_disk", disk, "2 * cap area over the true disk; sanity bracket only"),)
    return AnalyticGraph(
        name="sphere_cap",
        u=u,
        grad_u=grad,
        hess_u=hess,
        domain=mesh.regular_polygon(sides, radius),
        lipschitz=float(radius / np.sqrt(R * R - radius * radius)),
        mesh_kind="polygon",
        bounds=(-radius, radius, -radius, radius),
        references=refs,
    )


def _gaussian_bump(amplitude=0.5, sigma=0.5, bounds=(-1.0, 1.0, -1.0, 1.0)):
    s2 = sigma * sigma

    def u(x):
        return amplitude * np.exp(-np.sum(x * x, axis=1) / (2 * s2))

    def grad(x):
        return -x / s2 * u(x)[:, None]

    def hess(x):
        return (np.einsum("ni,nj->nij", x, x) / (s2 * s2) - np.eye(2)[None] / s2) * u(x)[:, None, None]

    return AnalyticGraph(
        name="gaussian_bump",
        u=u,
        grad_u=grad,
        hess_u=hess,
        domain=mesh.rectangle(*bounds),
        lipschitz=float(amplitude / sigma * np.exp(-0.5)),
        bounds=bounds,
    )


def _cubic(bounds=(-0.5, 0.5, -0.5, 0.5)):
    def hess(x):
        H = np.zeros((len(x), 2, 2))
        H[:, 0, 0] = 6 * x[:, 0]
        return H

    return AnalyticGraph(
        name="cubic",
        u=lambda x: x[:, 0] ** 3,
        grad_u=lambda x: np.column_stack([3 * x[:, 0] ** 2, np.zeros(len(x))]),
        hess_u=hess,
        domain=mesh.rectangle(*bounds),
        lipschitz=3 * max(abs(bounds[0]), abs(bounds[1])) ** 2,
        bounds=bounds,
    )


def catalog():
    return [
        _plane(a=(0.0, 0.0), b=0.0, name="flat"),
        _plane(),
        _paraboloid(),
        _saddle(),
        _sphere_cap(),
        _gaussian_bump(),
        _cubic(),
    ]


def get(name) -> AnalyticGraph:
    for entry in catalog():
        if entry.name == name:
            return entry
    raise KeyError(f"unknown surface {name!r}; choose from {[e.name for e in catalog()]}")


def names():
    return [e.name for e in catalog()]


def derivative_errors(entry: AnalyticGraph, points, step=1e-6):
    """Max deviation of ``grad_u`` / ``hess_u`` from central differences."""
    x = np.asarray(points, dtype=float)
    g_fd = np.empty((len(x), 2))
    h_fd = np.empty((len(x), 2, 2))
    for i in range(2):
        d = np.zeros(2)
        d[i] = step
        g_fd[:, i] = (entry.u(x + d) - entry.u(x - d)) / (2 * step)
        h_fd[:, :, i] = (entry.grad_u(x + d) - entry.grad_u(x - d)) / (2 * step)
    return (
        float(np.abs(g_fd - entry.grad_u(x)).max()),
        float(np.abs(h_fd - entry.hess_u(x)).max()),
    )
