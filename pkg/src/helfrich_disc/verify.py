"""Check suite behind ``helfrich-disc verify``."""
import numpy as np

from . import directors as dr
from .energy import check_assumptions
from .errors import LemmaViolation
from .mesh import regularity
from .surfaces import derivative_errors

IDENTITY_TOL = 1e-12


def identity_residuals(field):
    """Max residuals of Dn nbar = 0, Dn J = grad_n and midpoint reproduction,
    each relative to max(1, largest |Dn| entry)."""
    cx = field.complex
    Dn = dr.shape_operators(field)
    scale = max(1.0, float(np.abs(Dn).max(initial=0.0)))
    out = {"normal_kill": float(np.abs(np.einsum("tij,tj->ti", Dn, cx.normals)).max()) / scale}
    if cx.base is not None:
        gn = dr.planar_gradients(field)
        out["chain_rule"] = float(np.abs(np.einsum("tij,tjk->tik", Dn, cx.jacobians) - gn).max()) / scale
    vals = field.values[cx.tri_edges]
    center = vals.mean(axis=1)
    mids = cx.midpoints[cx.tri_edges] - cx.centroids[:, None, :]
    recon = center[:, None, :] + np.einsum("tij,tkj->tki", Dn, mids)
    vscale = max(1.0, float(np.abs(vals).max()))
    out["midpoint_reproduction"] = float(np.abs(recon - vals).max()) / vscale
    return out


def gauss_jacobian_error(samples=100, seed=0, step=1e-6):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-1, 1, size=(samples, 2))
    p *= (2.0 * np.sqrt(rng.uniform(size=samples)) / np.maximum(np.linalg.norm(p, axis=1), 1e-300))[:, None]
    D = dr.gauss_map_jacobian(p)
    fd = np.empty_like(D)
    for j in range(2):
        d = np.zeros(2)
        d[j] = step
        fd[:, :, j] = (dr.gauss_map(p + d) - dr.gauss_map(p - d)) / (2 * step)
    return float(np.abs(D - fd).max())


def run_suite(cx, field, surface, integrand, c_star=0.05, pseudo_threshold=0.5, label=""):
    prefix = f"{label}: " if label else ""
    results = []

    def add(name, passed, detail):
        results.append({"check": prefix + name, "passed": bool(passed), "detail": detail})

    reg = regularity(cx, c_star)
    add("regularity", reg.is_regular, f"c_star={reg.c_star:.6g} (threshold {c_star:g}), h={reg.size_h:.6g}")

    bad = field.violations()
    if bad:
        name, key, res = bad[0]
        add(f"constraints[{field.family}]", False, f"{len(bad)} violation(s); first {name} on edge {list(key)} residual {res:.3e}")
        results[-1]["edges"] = [[n, list(k), r] for n, k, r in bad[:50]]
    else:
        add(f"constraints[{field.family}]", True, f"{cx.n_edges} edges")

    for name, res in identity_residuals(field).items():
        add(name, res <= IDENTITY_TOL, f"max residual {res:.3e}")

    try:
        if field.family == dr.UNIT:
            st = dr.check_normal_estimate(field)
            add("normal_estimate", True, f"max ratio {st.max:.6g}, mean {st.mean:.6g}, vacuous {st.vacuous}")
        else:
            st = dr.check_pseudo_estimate(field, pseudo_threshold)
            add("pseudo_estimate", True, f"max ratio {st.max:.6g}, mean {st.mean:.6g}, skipped {st.skipped}")
    except LemmaViolation as exc:
        add("normal_estimate", False, str(exc))

    err = gauss_jacobian_error()
    add("gauss_map_jacobian", err <= 1e-6, f"max fd error {err:.3e}")

    if surface is not None:
        rng = np.random.default_rng(1)
        lo = surface.domain.min(axis=0)
        hi = surface.domain.max(axis=0)
        pts = lo + (hi - lo) * (0.05 + 0.9 * rng.uniform(size=(50, 2)))
        if surface.mesh_kind == "polygon":
            pts *= 0.6
        g_err, h_err = derivative_errors(surface, pts)
        add("surface_derivatives", g_err <= 1e-6 and h_err <= 1e-5, f"grad {g_err:.2e}, hess {h_err:.2e}")

    coercive, convex = check_assumptions(integrand)
    ok = (coercive and convex) or integrand.assumption_violating
    add("integrand_assumptions", ok, f"coercive={coercive} convex={convex} flagged_violating={integrand.assumption_violating}")
    return results
