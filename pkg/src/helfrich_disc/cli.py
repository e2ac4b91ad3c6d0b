"""Command-line driver.

Exit codes: 0 success, 1 verification failure, 2 usage error,
3 numerical or degeneracy error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys

import numpy as np

from . import convergence, meshio, mesh, surfaces
from . import directors as dr
from . import energy as en
from . import optimize as opt
from .errors import MeshFormatError, NumericalError, VerificationError

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DOMAINS = {
    "unit-square": ("rectangle", (0.0, 1.0, 0.0, 1.0)),
    "centered-square": ("rectangle", (-0.5, 0.5, -0.5, 0.5)),
    "disk64": ("polygon", None),
}

# dest -> (config section, key, type, default)
SETTINGS = {
    "surface": ("experiment", "surface", str, "paraboloid"),
    "integrand": ("experiment", "integrand", str, "willmore"),
    "p": ("experiment", "p", float, 2.0),
    "quad_order": ("experiment", "quad_order", int, 4),
    "threads": ("experiment", "threads", int, os.cpu_count() or 1),
    "pattern": ("mesh", "pattern", str, "right"),
    "n": ("mesh", "n", int, 8),
    "n_start": ("mesh", "n_start", int, 8),
    "refinements": ("mesh", "refinements", int, 4),
    "domain": ("mesh", "domain", str, None),
    "mesh_file": ("mesh", "file", str, None),
    "directors": ("directors", "source", str, "recovery"),
    "family": ("directors", "family", str, dr.PSEUDO_UNIT),
    "directors_file": ("directors", "file", str, None),
    "grad_tol": ("optimize", "grad_tol", float, None),
    "step_tol": ("optimize", "step_tol", float, 1e-14),
    "max_iters": ("optimize", "max_iters", int, None),
    "initial": ("optimize", "initial", str, "recovery"),
    "output": ("output", "path", str, None),
    "csv": ("output", "csv", str, None),
    "summary": ("output", "summary", str, None),
    "c_star": ("tolerances", "c_star", float, mesh.DEFAULT_C_STAR),
    "pseudo_threshold": ("tolerances", "pseudo_threshold", float, 0.5),
}


class UsageError(Exception):
    pass


def resolve(args):
    """Merge command line, config file and defaults (in that precedence)."""
    cfg = configparser.ConfigParser()
    if getattr(args, "config", None):
        if not cfg.read(args.config):
            raise UsageError(f"cannot read config file {args.config}")
    out = {}
    for dest, (section, key, typ, default) in SETTINGS.items():
        val = getattr(args, dest, None)
        if val is None and cfg.has_option(section, key):
            raw = cfg.get(section, key)
            try:
                val = typ(raw)
            except ValueError:
                raise UsageError(f"bad value for [{section}] {key}: {raw!r}") from None
        out[dest] = default if val is None else val
    for k, v in vars(args).items():
        out.setdefault(k, v)
    if out["pattern"] not in ("right", "crisscross"):
        raise UsageError(f"unknown pattern {out['pattern']!r}")
    if out["surface"] not in surfaces.names() and out["surface"] != "none":
        raise UsageError(f"unknown surface {out['surface']!r}")
    return out


def _integrand(opts):
    try:
        return en.integrand_by_name(opts["integrand"], p=opts["p"], allow_violating=opts.get("allow_violating", False))
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _fmt(x):
    return format(float(x), ".17g")


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_problem(opts):
    """(surface or None, complex, mesh file or None)."""
    surf = None if opts["surface"] == "none" else surfaces.get(opts["surface"])
    if opts["mesh_file"]:
        mf = meshio.read(opts["mesh_file"])
        values = mf.values
        if values is None:
            if surf is None:
                raise UsageError("mesh file has no nodal values and no surface was given")
            values = surfaces.nodal_sample(surf, mf.triangulation)
        return surf, mesh.push_forward(mf.triangulation, values), mf
    if surf is None:
        raise UsageError("either --surface or --mesh is required")
    return surf, convergence.level_complex(surf, opts["n"], opts["pattern"]), None


def _directors(opts, surf, cx, mf, integrand):
    source = opts["directors"]
    if source == "file":
        src = meshio.read(opts["directors_file"]) if opts["directors_file"] else mf
        if src is None:
            raise UsageError("--directors file needs --directors-file or a mesh file with directors")
        return src.director_field(cx)
    if source == "n0":
        return dr.apriori_field(cx, opts["family"])
    if source == "recovery":
        if surf is None:
            raise UsageError("recovery directors need an analytic surface")
        return dr.recovery_director(cx, surf)
    if source == "optimize":
        return _optimize(opts, surf, cx, mf, integrand).field
    raise UsageError(f"unknown director source {source!r}")


def _initial(opts, surf, cx, mf):
    init = opts["initial"]
    if init == "n0":
        return None
    if init == "recovery":
        return None if surf is None else dr.recovery_director(cx, surf)
    if init == "file":
        return _directors({**opts, "directors": "file"}, surf, cx, mf, None)
    raise UsageError(f"unknown initial field {init!r}")


def _optimize(opts, surf, cx, mf, integrand):
    init = _initial(opts, surf, cx, mf)
    family = opts["family"]
    if family == dr.PSEUDO_UNIT:
        if init is not None and init.family == dr.UNIT:
            init = dr.pseudo_projection(init)
        if not (integrand.quadratic_in_A and integrand.weight is not None):
            raise UsageError(f"pseudo-unit solver needs a quadratic integrand, got {integrand.name}")
    elif family != dr.UNIT:
        raise UsageError(f"unknown family {family!r}")
    problem = opt.OptimizationProblem(
        cx,
        integrand,
        family,
        init,
        opt.Tolerances(opts["grad_tol"], opts["step_tol"], opts["max_iters"]),
        opts["quad_order"],
    )
    return opt.solve(problem)


# -- commands ------------------------------------------------------------------


def cmd_mesh(opts):
    dom = opts["domain"]
    if dom is not None and dom not in DOMAINS:
        raise UsageError(f"unknown domain {dom!r}; choose from {sorted(DOMAINS)}")
    values = None
    if dom is None:
        surf = surfaces.get(opts["surface"])
        t = surf.mesh(opts["n"], opts["pattern"])
        if opts.get("with_values"):
            values = surfaces.nodal_sample(surf, t)
    else:
        kind, bounds = DOMAINS[dom]
        if kind == "rectangle":
            t = mesh.structured_mesh(bounds, opts["n"], opts["pattern"])
        else:
            t = surfaces.get("sphere_cap").mesh(opts["n"])
    for _ in range(opts.get("refine") or 0):
        t = mesh.refine_uniform(t)
    text = meshio.dumps(t, values)
    if opts["output"] in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(opts["output"], "w", encoding="utf-8") as fh:
            fh.write(text)
    reg = mesh.regularity(t, opts["c_star"])
    print(
        f"triangles={t.n_triangles} edges={t.n_edges} h={_fmt(reg.size_h)} c_star={_fmt(reg.c_star)}",
        file=sys.stderr,
    )
    return EXIT_OK


ENERGY_COLUMNS = ["h", "c_star", "E_discrete", "E_continuous", "E_fd", "error_abs", "error_rel"]


def cmd_energy(opts):
    integrand = _integrand(opts)
    surf, cx, mf = _load_problem(opts)
    fld = _directors(opts, surf, cx, mf, integrand)
    report = en.discrete_energy(cx, fld, integrand, opts["quad_order"], opts["threads"])
    E0 = convergence.reference_energy(surf, integrand).total if surf is not None else math.nan
    Efd = en.fd_energy(cx).total if opts.get("fd") else math.nan
    err = abs(report.total - E0)
    row = {
        "h": report.size_h,
        "c_star": report.c_star,
        "E_discrete": report.total,
        "E_continuous": E0,
        "E_fd": Efd,
        "error_abs": err,
        "error_rel": err / abs(E0) if E0 else math.nan,
    }
    payload = report.as_dict(per_triangle=opts.get("per_triangle", False))
    payload.update({"E_continuous": E0, "E_fd": Efd, "directors": opts["directors"], "family": fld.family})
    _dump_json(payload, opts["output"])
    line = "# helfrich-disc v1\n" + ",".join(ENERGY_COLUMNS) + "\n" + ",".join(_fmt(row[c]) for c in ENERGY_COLUMNS) + "\n"
    if opts["csv"]:
        with open(opts["csv"], "w", encoding="utf-8") as fh:
            fh.write(line)
    return EXIT_OK


def cmd_converge(opts):
    if opts["refinements"] < 3:
        raise UsageError("converge needs at least 3 refinement levels")
    surf = surfaces.get(opts["surface"])
    source = opts["directors"]
    if source == "optimize":
        source = "optimize_pseudo" if opts["family"] == dr.PSEUDO_UNIT else "optimize_unit"
    if source not in ("recovery", "optimize_pseudo", "optimize_unit"):
        raise UsageError(f"converge supports recovery or optimize directors, got {opts['directors']!r}")
    table = convergence.run_convergence(
        surf,
        _integrand(opts),
        opts["pattern"],
        opts["n_start"],
        opts["refinements"],
        source,
        opts["quad_order"],
        opts.get("fd", False),
        opts["threads"],
        opts["pseudo_threshold"],
    )
    if opts["output"] in (None, "-"):
        convergence.write_csv(table, sys.stdout)
    else:
        with open(opts["output"], "w", encoding="utf-8", newline="") as fh:
            convergence.write_csv(table, fh)
    summary = {"format": "helfrich-disc v1", "surface": table.surface, "integrand": table.integrand, **table.summary}
    if opts["summary"]:
        _dump_json(summary, opts["summary"])
    else:
        print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def cmd_optimize(opts):
    integrand = _integrand(opts)
    surf, cx, mf = _load_problem(opts)
    res = _optimize(opts, surf, cx, mf, integrand)
    if opts["output"]:
        meshio.write(opts["output"], cx.base, cx.nodal_values, res.field)
    summary = {
        "format": "helfrich-disc v1",
        "family": res.field.family,
        "objective": res.objective,
        "energy": en.discrete_energy(cx, res.field, integrand, opts["quad_order"], opts["threads"]).total,
        "iterations": res.iterations,
        "converged": res.converged,
        "kkt_residual": res.kkt_residual,
    }
    _dump_json(summary, opts["summary"])
    return EXIT_OK


def cmd_verify(opts):
    from .verify import run_suite

    integrand = _integrand(opts)
    names = surfaces.names() if opts.get("all_surfaces") else [opts["surface"]]
    results = []
    for name in names:
        o = {**opts, "surface": name}
        surf, cx, mf = _load_problem(o)
        fld = _directors(o, surf, cx, mf, integrand)
        results += run_suite(cx, fld, surf, integrand, opts["c_star"], opts["pseudo_threshold"], label=name)
    width = max(len(r["check"]) for r in results)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['check']:<{width}}  {r['detail']}")
    failures = [r for r in results if not r["passed"]]
    if opts["output"]:
        _dump_json({"format": "helfrich-disc v1", "failures": failures, "checks": results}, opts["output"])
    if failures:
        print(json.dumps({"failures": failures}, sort_keys=True), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def _common(p, experiment=True):
    p.add_argument("--config", help="INI-style config file; command-line flags override it")
    p.add_argument("--surface", help=f"analytic surface: {', '.join(surfaces.names())}")
    p.add_argument("--pattern", choices=["right", "crisscross"])
    p.add_argument("--n", type=int, help="mesh subdivision level")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("-o", "--output", help="output path ('-' for stdout)")
    p.add_argument("--c-star", dest="c_star", type=float, help="regularity threshold")
    if experiment:
        p.add_argument("--mesh", dest="mesh_file", help="read the mesh (and values/directors) from this file")
        p.add_argument("--integrand", choices=list(en.INTEGRANDS))
        p.add_argument("--allow-violating", action="store_true", help="permit integrands that break coercivity")
        p.add_argument("--p", type=float, help="growth exponent for p_willmore")
        p.add_argument("--quad-order", dest="quad_order", type=int)
        p.add_argument("--directors", choices=["recovery", "optimize", "file", "n0"])
        p.add_argument("--directors-file", dest="directors_file")
        p.add_argument("--family", choices=list(dr.FAMILIES))
        p.add_argument("--grad-tol", dest="grad_tol", type=float)
        p.add_argument("--step-tol", dest="step_tol", type=float)
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--initial", choices=["recovery", "n0", "file"])
        p.add_argument("--pseudo-threshold", dest="pseudo_threshold", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="helfrich-disc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate and validate a mesh file")
    _common(p, experiment=False)
    p.add_argument("--domain", help=f"one of {', '.join(DOMAINS)} (default: the surface's domain)")
    p.add_argument("--refine", type=int, default=0, help="extra uniform refinements")
    p.add_argument("--with-values", action="store_true", help="store nodal values of the surface")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("energy", help="evaluate discrete, continuous and FD energies")
    _common(p)
    p.add_argument("--fd", action="store_true", help="also evaluate the finite-difference energy")
    p.add_argument("--csv", help="write the CSV row here")
    p.add_argument("--per-triangle", action="store_true")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("converge", help="refinement study, one CSV row per level")
    _common(p)
    p.add_argument("--n-start", dest="n_start", type=int)
    p.add_argument("--refinements", type=int)
    p.add_argument("--fd", action="store_true")
    p.add_argument("--summary", help="write fitted slopes as JSON here")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("optimize", help="minimize the energy over director fields")
    _common(p)
    p.add_argument("--summary", help="write the result summary as JSON here (default stdout)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("verify", help="run constraint, identity and estimate checks")
    _common(p)
    p.add_argument("--all-surfaces", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        opts = resolve(args)
        return args.func(opts)
    except (UsageError, MeshFormatError, FileNotFoundError) as exc:
        print(f"helfrich-disc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        key = getattr(exc, "edge_key", None)
        print(f"helfrich-disc: verification failed: {exc}" + (f" [edge {key}]" if key else ""), file=sys.stderr)
        return EXIT_VERIFY
    except NumericalError as exc:
        print(f"helfrich-disc: numerical error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
