"""Energy minimization over director fields on a fixed complex.

Every edge has one degree of freedom once the tangency constraint is
imposed: an offset ``s`` along ``w = tau x n0`` for pseudo-unit directors
(affine feasible set), or an angle ``theta`` on the unit circle for unit
directors (a closed arc once the orientation inequalities are added).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import directors as dr
from .energy import Integrand, triangle_energies, triangle_energy_gradients
from .errors import SolverStall
from .mesh import TriangularComplex3D

ARMIJO = 1e-4
SHRINK = 0.5


@dataclass(frozen=True)
class Tolerances:
    grad_tol: float | None = None  # family default when None
    step_tol: float = 1e-14
    max_iters: int | None = None


@dataclass(frozen=True)
class OptimizationProblem:
    complex: TriangularComplex3D
    integrand: Integrand
    family: str = dr.PSEUDO_UNIT
    initial: dr.DirectorField | None = None
    tolerances: Tolerances = Tolerances()
    quad_order: int = 4
    fix_boundary: bool = False


@dataclass
class OptimizationResult:
    field: dr.DirectorField
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    history: list = field(default_factory=list)


def conjugate_gradient(A, b, x0=None, rtol=1e-10, max_iters=None, precondition=True):
    """Jacobi-preconditioned CG for a symmetric positive semidefinite ``A``.

    Stops when ||b - A x|| <= rtol * ||b||.  Returns (x, iterations,
    relative residual); raises :class:`SolverStall` past ``max_iters``.
    """
    n = len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    max_iters = 10 * n + 100 if max_iters is None else max_iters
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    if precondition:
        d = A.diagonal() if sp.issparse(A) else np.diag(A)
        minv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)
    else:
        minv = np.ones(n)
    r = b - A @ x
    z = minv * r
    p = z.copy()
    rz = r @ z
    for it in range(max_iters + 1):
        res = np.linalg.norm(r) / bnorm
        if res <= rtol:
            return x, it, res
        if it == max_iters:
            break
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            # direction of zero curvature: r is orthogonal to range(A)
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverStall(f"CG stopped at relative residual {res:.3e} after {it} iterations")


# -- pseudo-unit family ------------------------------------------------------


@dataclass(frozen=True)
class PseudoUnitSystem:
    """Q(s) = constant - rhs . s + s K s / 2 over interior-edge offsets."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constant: float
    free_edges: np.ndarray
    boundary_values: np.ndarray

    def objective(self, s):
        return float(self.constant - self.rhs @ s + 0.5 * s @ (self.matrix @ s))

    def gradient(self, s):
        return self.matrix @ s - self.rhs

    def field(self, s_free):
        cx_edges = len(self.boundary_values)
        s = np.zeros(cx_edges)
        s[self.free_edges] = s_free
        return s


def triangle_weights(cx, integrand: Integrand):
    """Per-triangle factor weight(lifted centroid) * area of the quadratic
    density weight(x) |A|^2."""
    if not integrand.quadratic_in_A or integrand.weight is None:
        raise ValueError(f"integrand {integrand.name!r} is not of the form w(x)|A|^2")
    return integrand.weight(cx.centroids) * cx.areas


def assemble_pseudo_unit(cx: TriangularComplex3D, integrand: Integrand, boundary_values=None) -> PseudoUnitSystem:
    n0, w = dr.edge_frames(cx)
    inner = cx.interior
    base = n0.copy()
    if boundary_values is not None:
        base[~inner] = np.asarray(boundary_values)[~inner]
    free = np.flatnonzero(inner)
    dof = np.full(cx.n_edges, -1)
    dof[free] = np.arange(len(free))

    c = triangle_weights(cx, integrand)  # (T,)
    g = cx.cr_gradients  # (T, 3, 3)
    te = cx.tri_edges
    C = np.einsum("tki,tkj->tij", base[te], g)
    wl = w[te]  # (T, 3, 3)
    ww = np.einsum("tki,tli->tkl", wl, wl)
    gg = np.einsum("tki,tli->tkl", g, g)
    local_K = 2.0 * c[:, None, None] * ww * gg
    local_r = -2.0 * c[:, None] * np.einsum("tki,tij,tkj->tk", wl, C, g)

    d = dof[te]  # (T, 3)
    rows = np.broadcast_to(d[:, :, None], local_K.shape)
    cols = np.broadcast_to(d[:, None, :], local_K.shape)
    keep = (rows >= 0) & (cols >= 0)
    K = sp.coo_matrix((local_K[keep], (rows[keep], cols[keep])), shape=(len(free), len(free))).tocsr()
    K.sum_duplicates()
    rk = d >= 0
    rhs = np.bincount(d[rk], weights=local_r[rk], minlength=len(free))
    const = float(np.sum(c * np.einsum("tij,tij->t", C, C)))
    return PseudoUnitSystem(K, rhs, const, free, base)


def solve_pseudo_unit_quadratic(
    cx: TriangularComplex3D,
    integrand: Integrand,
    initial: dr.DirectorField | None = None,
    grad_tol=1e-10,
    max_iters=None,
) -> OptimizationResult:
    """Global minimizer over pseudo-unit directors.

    Boundary directors are held at ``initial``'s values (default: the
    incident triangle normal); the interior offsets solve the normal equations
    of the convex quadratic by conjugate gradients, starting from s = 0.
    """
    bvals = None if initial is None else initial.values
    system = assemble_pseudo_unit(cx, integrand, bvals)
    s, iters, res = conjugate_gradient(system.matrix, system.rhs, rtol=grad_tol, max_iters=max_iters)
    result_field = dr.pseudo_from_offsets(cx, system.field(s), system.boundary_values)
    obj = system.objective(s)
    start = system.objective(np.zeros(len(s))) if initial is None else pseudo_objective(system, initial)
    history = [start, obj]
    return OptimizationResult(result_field, obj, iters, True, float(np.linalg.norm(system.gradient(s))), history)


def pseudo_offsets(field_: dr.DirectorField):
    """Offsets s with n = n0 + s w (meaningful on interior edges)."""
    _, w = dr.edge_frames(field_.complex)
    return np.sum(field_.values * w, axis=1)


def pseudo_objective(system: PseudoUnitSystem, field_: dr.DirectorField):
    return system.objective(pseudo_offsets(field_)[system.free_edges])


# -- unit family ----------------------------------------------------------------


def _edge_forces(cx, G):
    """dE/dn_e from per-triangle dE/dDn, shape (E, 3)."""
    per = np.einsum("tij,tkj->tki", G, cx.cr_gradients)  # (T, 3, 3): [t, k] = G_t g_tk
    out = np.zeros((cx.n_edges, 3))
    np.add.at(out, cx.tri_edges.reshape(-1), per.reshape(-1, 3))
    return out


def energy_of(field_: dr.DirectorField, integrand: Integrand, quad_order=4):
    return float(np.sum(triangle_energies(field_.complex, dr.shape_operators(field_), integrand, quad_order)))


def director_gradient(field_: dr.DirectorField, integrand: Integrand, quad_order=4):
    """dE/dn for every edge director, shape (E, 3)."""
    cx = field_.complex
    G = triangle_energy_gradients(cx, dr.shape_operators(field_), integrand, quad_order)
    return _edge_forces(cx, G)


def objective_gradient(field_: dr.DirectorField, integrand: Integrand, quad_order=4):
    """Gradient of the energy with respect to the per-edge parameter.

    Unit fields: d/dtheta with n = cos(theta) n0 + sin(theta) w.
    Pseudo-unit fields: d/ds with n = n0 + s w on interior edges (zero on the
    fixed boundary edges).
    """
    cx = field_.complex
    F = director_gradient(field_, integrand, quad_order)
    n0, w = dr.edge_frames(cx)
    if field_.family == dr.UNIT:
        theta = dr.angles_of(field_)
        tangent = -np.sin(theta)[:, None] * n0 + np.cos(theta)[:, None] * w
        return np.sum(F * tangent, axis=1)
    return np.where(cx.interior, np.sum(F * w, axis=1), 0.0)


def _projected(g, theta, lo, hi):
    pg = g.copy()
    pg[(theta <= lo) & (g > 0)] = 0.0
    pg[(theta >= hi) & (g < 0)] = 0.0
    return pg


def solve_unit_projected(
    cx: TriangularComplex3D,
    integrand: Integrand,
    initial: dr.DirectorField | None = None,
    grad_tol=1e-8,
    step_tol=1e-14,
    max_iters=20000,
    quad_order=4,
    fix_boundary=False,
) -> OptimizationResult:
    """Projected gradient descent on the edge angles.

    Each angle is confined to the arc where the director has nonnegative
    product with both incident normals; steps are clamped onto it.  Trial
    steps use the Barzilai-Borwein length and are halved until the Armijo
    condition holds, so the objective never increases.  With
    ``fix_boundary`` the boundary angles keep their initial values, which is
    how the pseudo-unit solver treats boundary edges.
    """
    half = dr.feasible_half_width(cx)
    lo, hi = -half, half
    if initial is None:
        initial = dr.apriori_field(cx, dr.UNIT)
    theta = np.clip(dr.angles_of(initial), lo, hi)
    if fix_boundary:
        frozen = ~cx.interior
        lo = np.where(frozen, theta, lo)
        hi = np.where(frozen, theta, hi)

    def evaluate(th):
        f = dr.unit_from_angles(cx, th)
        return energy_of(f, integrand, quad_order), objective_gradient(f, integrand, quad_order)

    E, g = evaluate(theta)
    history = [E]
    pg = _projected(g, theta, lo, hi)
    gmax = np.abs(g).max() if len(g) else 0.0
    alpha = 1.0 / gmax if gmax > 0 else 1.0
    converged = False
    it = 0
    while True:
        pg = _projected(g, theta, lo, hi)
        if np.abs(pg).max(initial=0.0) <= grad_tol:
            converged = True
            break
        if it >= max_iters:
            break
        step = alpha
        accepted = False
        for _ in range(60):
            trial = np.clip(theta - step * g, lo, hi)
            E_new, g_new = evaluate(trial)
            if E_new <= E + ARMIJO * g @ (trial - theta):
                accepted = True
                break
            step *= SHRINK
        if not accepted:
            break
        s = trial - theta
        y = g_new - g
        it += 1
        theta, E, g = trial, E_new, g_new
        history.append(E)
        if np.abs(s).max() < step_tol:
            break
        sy = s @ y
        alpha = (s @ s) / sy if sy > 0 else 2.0 * step
    result_field = dr.unit_from_angles(cx, theta)
    return OptimizationResult(result_field, E, it, converged, float(np.abs(pg).max(initial=0.0)), history)


def solve(problem: OptimizationProblem) -> OptimizationResult:
    tol = problem.tolerances
    if problem.family == dr.PSEUDO_UNIT:
        return solve_pseudo_unit_quadratic(
            problem.complex,
            problem.integrand,
            problem.initial,
            grad_tol=tol.grad_tol or 1e-10,
            max_iters=tol.max_iters,
        )
    return solve_unit_projected(
        problem.complex,
        problem.integrand,
        problem.initial,
        grad_tol=tol.grad_tol or 1e-8,
        step_tol=tol.step_tol,
        max_iters=tol.max_iters or 20000,
        quad_order=problem.quad_order,
        fix_boundary=problem.fix_boundary,
    )
