"""Mesh-refinement studies: discrete vs continuous energy, interpolation and
director errors, and comparison-ratio statistics per level."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import directors as dr
from . import energy as en
from . import optimize as opt
from .mesh import push_forward, regularity
from .quadrature import physical_points
from .surfaces import AnalyticGraph, nodal_sample

EXACT = 1e-14
# gradient errors carry rounding amplified by 1/h
GRAD_EXACT = 1e-10

COLUMNS = [
    "level",
    "n",
    "h",
    "c_star",
    "E_discrete",
    "E_continuous",
    "E_fd",
    "error_abs",
    "error_rel",
    "rate_energy",
    "director_err",
    "rate_director",
    "u_sup_err",
    "grad_u_l2_err",
    "grad_n_sup_err",
    "ratio_unit_max",
    "ratio_unit_mean",
    "ratio_pseudo_max",
    "ratio_pseudo_mean",
    "E_pseudo_projected",
    "E_pseudo_optimized",
]


def reference_mesh(surface: AnalyticGraph):
    """Quadrature mesh for the continuous energy, fixed per surface."""
    if surface.mesh_kind == "rectangle":
        return surface.mesh(16, "crisscross")
    return surface.mesh(8)


def reference_energy(surface: AnalyticGraph, integrand, quad_order=8):
    return en.continuous_energy(surface, integrand, quad_order, reference_mesh(surface))


def level_complex(surface: AnalyticGraph, n, pattern="right"):
    t = surface.mesh(n, pattern)
    return push_forward(t, nodal_sample(surface, t))


def fit_rate(h, err, exact=EXACT):
    """Least-squares slope of log(err) against log(h).

    Returns ``inf`` when every error is at or below ``exact`` (exact
    reproduction up to rounding) and ``nan`` when fewer than two errors are
    usable.
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if np.all(err <= exact):
        return math.inf
    ok = err > exact
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(h[ok]), np.log(err[ok]), 1)[0])


def successive_rates(h, err):
    rates = [math.nan]
    for i in range(1, len(h)):
        if err[i] <= EXACT or err[i - 1] <= EXACT:
            rates.append(math.nan)
        else:
            rates.append(math.log(err[i - 1] / err[i]) / math.log(h[i - 1] / h[i]))
    return rates


def interpolation_errors(cx, surface: AnalyticGraph, field_: dr.DirectorField | None = None, quad_order=6):
    """Errors of the recovery construction on one level.

    ``u_sup``: max |u_h - u| and ``grad_n_sup``: max |grad n_h - grad n(grad u)|
    over vertices, edge midpoints and quadrature points; ``grad_u_l2``: L2
    norm of grad u_h - grad u by quadrature; ``director_mid``: max over edges
    of |n(e) - n(grad u(m))|.
    """
    t = cx.base
    corners = t.vertices[t.triangles]
    pts, w = physical_points(corners, quad_order)
    T, Q = pts.shape[:2]
    # sample set per triangle: quadrature points, corners, edge midpoints
    mids = t.midpoints[t.tri_edges]
    samples = np.concatenate([pts, corners, mids], axis=1)  # (T, S, 2)
    S = samples.shape[1]
    flat = samples.reshape(-1, 2)

    u_nodes = cx.nodal_values[t.triangles]
    grad_uh = cx.grad_u
    uh = np.einsum("tk,tk->t", u_nodes, np.ones((T, 3)) / 3.0)[:, None] + np.einsum(
        "tsd,td->ts", samples - t.centroids[:, None, :], grad_uh
    )
    u_sup = float(np.abs(uh.reshape(-1) - surface.u(flat)).max())

    gdiff = grad_uh[:, None, :] - surface.grad_u(pts.reshape(-1, 2)).reshape(T, Q, 2)
    grad_l2 = float(np.sqrt(np.sum(np.abs(t.areas) * (np.sum(gdiff**2, axis=2) @ w))))

    out = {"u_sup": u_sup, "grad_u_l2": grad_l2}
    if field_ is not None:
        exact_mid = dr.gauss_map(surface.grad_u(t.midpoints))
        out["director_mid"] = float(np.linalg.norm(field_.values - exact_mid, axis=1).max())
        gn = dr.planar_gradients(field_)
        exact = en.normal_gradient(surface, flat).reshape(T, S, 3, 2)
        out["grad_n_sup"] = float(np.linalg.norm(gn[:, None] - exact, axis=(2, 3)).max())
    return out


@dataclass
class ConvergenceTable:
    surface: str
    integrand: str
    pattern: str
    directors: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _director_field(cx, surface, integrand, source, quad_order):
    rec = dr.recovery_director(cx, surface)
    if source == "recovery":
        return rec
    if source == "optimize_unit":
        return opt.solve_unit_projected(cx, integrand, rec, quad_order=quad_order).field
    if source == "optimize_pseudo":
        return opt.solve_pseudo_unit_quadratic(cx, integrand, dr.pseudo_projection(rec)).field
    raise ValueError(f"unknown director source {source!r}")


def run_convergence(
    surface: AnalyticGraph,
    integrand=None,
    pattern="right",
    n_start=8,
    refinements=4,
    directors="recovery",
    quad_order=4,
    fd=False,
    workers=1,
    pseudo_threshold=0.5,
) -> ConvergenceTable:
    """One row per level n = n_start * 2^k, k < refinements."""
    if refinements < 1:
        raise ValueError("refinements must be >= 1")
    integrand = integrand or en.willmore()
    E0 = reference_energy(surface, integrand).total
    table = ConvergenceTable(surface.name, integrand.name, pattern, directors)
    quadratic = integrand.quadratic_in_A and integrand.weight is not None

    for level in range(refinements):
        n = n_start * 2**level
        cx = level_complex(surface, n, pattern)
        reg = regularity(cx)
        rec = dr.recovery_director(cx, surface)
        fld = rec if directors == "recovery" else _director_field(cx, surface, integrand, directors, quad_order)
        E = en.discrete_energy(cx, fld, integrand, quad_order, workers).total
        errs = interpolation_errors(cx, surface, fld)
        unit_field = fld if fld.family == dr.UNIT else rec
        l31 = dr.check_normal_estimate(unit_field)
        projected = dr.pseudo_projection(rec)
        if quadratic:
            pseudo = opt.solve_pseudo_unit_quadratic(cx, integrand, projected).field
            e_proj = en.discrete_energy(cx, projected, integrand, quad_order, workers).total
            e_opt = en.discrete_energy(cx, pseudo, integrand, quad_order, workers).total
        else:
            pseudo, e_proj, e_opt = projected, math.nan, math.nan
        lA2 = dr.check_pseudo_estimate(pseudo, threshold=pseudo_threshold)
        err = abs(E - E0)
        table.rows.append(
            {
                "level": level,
                "n": n,
                "h": reg.size_h,
                "c_star": reg.c_star,
                "E_discrete": E,
                "E_continuous": E0,
                "E_fd": en.fd_energy(cx).total if fd else math.nan,
                "error_abs": err,
                "error_rel": err / abs(E0) if E0 != 0 else math.nan,
                "director_err": errs["director_mid"],
                "u_sup_err": errs["u_sup"],
                "grad_u_l2_err": errs["grad_u_l2"],
                "grad_n_sup_err": errs["grad_n_sup"],
                "ratio_unit_max": l31.max,
                "ratio_unit_mean": l31.mean,
                "ratio_pseudo_max": lA2.max,
                "ratio_pseudo_mean": lA2.mean,
                "E_pseudo_projected": e_proj,
                "E_pseudo_optimized": e_opt,
            }
        )

    h = [r["h"] for r in table.rows]
    for key, rate_key in (("error_abs", "rate_energy"), ("director_err", "rate_director")):
        for row, rate in zip(table.rows, successive_rates(h, [r[key] for r in table.rows])):
            row[rate_key] = rate
    table.summary = {
        "slope_energy": fit_rate(h, [r["error_abs"] for r in table.rows]),
        "slope_director": fit_rate(h, [r["director_err"] for r in table.rows]),
        "slope_u_sup": fit_rate(h, [r["u_sup_err"] for r in table.rows]),
        "slope_grad_u_l2": fit_rate(h, [r["grad_u_l2_err"] for r in table.rows], GRAD_EXACT),
        "slope_grad_n_sup": fit_rate(h, [r["grad_n_sup_err"] for r in table.rows], GRAD_EXACT),
    }
    return table


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(table: ConvergenceTable, fh):
    fh.write("# helfrich-disc v1\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in table.rows:
        writer.writerow([_fmt(row[c]) for c in COLUMNS])
