"""Command-line front end: parse -> analyze -> classify -> solve -> verify,
with machine-readable JSON reports and a short text rendering on stdout.

Exit codes: 0 success; 2 parse error; 3 internal inconsistency; 4 no
applicable solve recipe; 5 Newton divergence or branch ambiguity; 6
verification tolerance exceeded; 1 anything else.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import sympy as sp

from . import ComplinError, __version__
from . import analyticity, expr, linearizability, presets, solve, symmetry, verify
from .config import Config, load_config
from .parser import (OdeSystem, ParseError, bind_parameters, format_expression,
                     format_vector_field, parse_system)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INTERNAL = 3
EXIT_NO_RECIPE = 4
EXIT_NEWTON = 5
EXIT_VERIFY = 6


class VerifyFailed(ComplinError):
    pass


def parse_complex_literal(text: str) -> complex:
    """Literals like 2+0.5i, -1, 0.3i, i."""
    cleaned = text.strip().replace(" ", "").replace("i", "j")
    if cleaned in ("j", "+j"):
        cleaned = "1j"
    if cleaned == "-j":
        cleaned = "-1j"
    try:
        return complex(cleaned)
    except ValueError:
        raise ComplinError("cannot parse complex literal %r" % text) from None


def parse_param_args(items) -> dict:
    """--param entries: repeatable and comma-separated name=value pairs."""
    out = {}
    for item in items or ():
        for piece in item.split(","):
            piece = piece.strip()
            if not piece:
                continue
            if "=" not in piece:
                raise ComplinError("--param needs name=value, got %r" % piece)
            name, _, val = piece.partition("=")
            out[name.strip()] = val.strip()
    return out


def parse_grid(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise ComplinError("--grid needs start:stop:step, got %r" % text)
    start, stop, step = (float(p) for p in parts)
    if not stop > start:
        raise ComplinError("grid stop must exceed start")
    return (start, stop, step)


def _split_bindings(sys: OdeSystem, raw: dict) -> tuple:
    """Separate system-parameter bindings (exact rationals) from
    solution-parameter bindings (complex)."""
    sys_names = {s.name for s in sys.parameters}
    sys_bind, sol_bind = {}, {}
    for name, text in raw.items():
        if name in sys_names:
            try:
                sys_bind[name] = Fraction(text)
            except ValueError:
                raise ComplinError(
                    "system parameter %s needs an exact real value, got %r"
                    % (name, text)) from None
        else:
            sol_bind[name] = parse_complex_literal(text)
    return sys_bind, sol_bind


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _fmt(e) -> str:
    return format_expression(expr.normalize(sp.sympify(e)))


def _fraction_str(q) -> str:
    q = sp.Rational(q)
    return "%d" % q.p if q.q == 1 else "%d/%d" % (q.p, q.q)


def _gaussian_str(c) -> dict:
    c = sp.sympify(c)
    re_p, im_p = c.as_real_imag()
    return {"re": _fraction_str(re_p), "im": _fraction_str(im_p)}


def _complex_str(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return repr(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return "%r%s%ri" % (z.real, sign, abs(z.imag))


# report assembly -------------------------------------------------------------

def _cr_section(rep) -> dict:
    return {
        "verdict": rep.verdict,
        "residuals": [_fmt(r) for r in rep.residuals],
        "violated": list(rep.violated),
    }


def _symmetry_section(basis, gamma) -> dict:
    n = len(basis)
    brackets = []
    for a in range(n):
        for b in range(a + 1, n):
            coeffs = gamma[a][b]
            terms = [
                ("%s*X%d" % (Fraction(c), k + 1)) if c != 1 else "X%d" % (k + 1)
                for k, c in enumerate(coeffs) if c != 0
            ]
            brackets.append("[X%d,X%d] = %s" % (a + 1, b + 1,
                                                " + ".join(terms) or "0"))
    return {
        "dimension": basis.dimension,
        "degree_cap": basis.degree_cap,
        "generators": [format_vector_field(f) for f in basis],
        "structure_constants": [[[str(Fraction(c)) for c in row]
                                 for row in plane] for plane in gamma],
        "bracket_table": brackets,
    }


def _classification_section(rep) -> dict:
    out = {"label": rep.label,
           "symmetry_dimension": rep.symmetry_dimension,
           "degree_cap": rep.degree_cap,
           "canonical_type": rep.canonical_type,
           "recipe": rep.recipe,
           "cr": _cr_section(rep.cr)}
    out["cubic_coefficients"] = (
        {k: _fmt(v) for k, v in rep.cubic.as_dict().items()}
        if rep.cubic is not None else None)
    out["constraints"] = (
        {"residuals": [_fmt(r) for r in rep.constraints.residuals],
         "verdict": rep.constraints.verdict}
        if rep.constraints is not None else None)
    out["geodesic"] = ([_fmt(g) for g in rep.geodesic]
                       if rep.geodesic is not None else None)
    return out


def _solution_section(sol: solve.ComplexSolution, bindings: dict) -> dict:
    out = {
        "recipe": sol.recipe,
        "kind": sol.kind,
        "chain": list(sol.chain.names),
        "chain_steps": [
            {"name": s.name, "chi": _fmt(s.chi_expr), "U": _fmt(s.U_expr),
             "target": s.target.describe()}
            for s in sol.chain.steps
        ],
        "extra_steps": [s.name for s in sol.extra_steps],
        "target": sol.target.describe() if sol.target is not None else None,
        "target_solution": (_fmt(sol.target_solution)
                            if sol.target_solution is not None else None),
        "relation": _fmt(sol.relation),
        "parameters": {k: _complex_str(v) for k, v in sorted(bindings.items())},
        "series_order": sol.series_order,
        "center": _fmt(sol.center) if sol.center is not None else None,
    }
    if sol.series_coefficients:
        out["series_coefficients"] = {
            name: [_gaussian_str(c) for c in coeffs]
            for name, coeffs in sorted(sol.series_coefficients.items())
        }
    return out


def _write_report(report: dict, args) -> bool:
    """Write/print the JSON body; returns True when JSON went to stdout
    (text rendering is suppressed then)."""
    body = json.dumps(report, indent=2, sort_keys=True)
    if getattr(args, "report", None):
        Path(args.report).write_text(body + "\n")
    if getattr(args, "json", False):
        print(body)
        return True
    return False


# subcommands -----------------------------------------------------------------

def _load_system(path_text: str, raw_params: dict) -> tuple:
    path = Path(path_text)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ComplinError("cannot read %s: %s" % (path, exc))
    doc = parse_system(text)
    sys_bind, sol_bind = _split_bindings(doc, raw_params)
    if sys_bind:
        doc = bind_parameters(doc, sys_bind)
    return doc, path, sys_bind, sol_bind


def cmd_classify(args, cfg: Config) -> int:
    raw = parse_param_args(args.param)
    doc, path, sys_bind, _ = _load_system(args.file, raw)
    degree = args.degree or cfg.degree_cap
    t0 = time.perf_counter()
    basis = None
    sym_section = None
    sym_error = None
    try:
        basis = symmetry.find_symmetries(doc, degree_cap=degree,
                                         max_entries=cfg.ansatz_max_entries)
        gamma = symmetry.structure_constants(basis) if len(basis) else None
        sym_section = _symmetry_section(basis, gamma) if gamma is not None else {
            "dimension": 0, "degree_cap": basis.degree_cap, "generators": [],
            "structure_constants": [], "bracket_table": []}
    except symmetry.SymmetryError as exc:
        sym_error = str(exc)
    rep = linearizability.classify(doc, sym=basis, degree_cap=degree)
    elapsed = time.perf_counter() - t0

    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": "classify",
        "input": {"path": str(path), "sha256": _sha256(path),
                  "system": doc.name,
                  "parameters_bound": {k: str(v) for k, v in sorted(sys_bind.items())}},
        "classification": _classification_section(rep),
        "symmetries": sym_section,
        "symmetry_search_error": sym_error,
        "timings": {"seconds": elapsed},
    }
    if _write_report(report, args):
        return EXIT_OK
    print("system %s (%s)" % (doc.name, path))
    print("CR check: %s" % ("pass" if rep.cr.verdict else
                            "FAIL (%s)" % "; ".join(rep.cr.violated)))
    if rep.cubic is not None:
        nonzero = {k: _fmt(v) for k, v in rep.cubic.as_dict().items() if v != 0}
        print("cubic coefficients: %s" % (
            ", ".join("%s = %s" % kv for kv in nonzero.items()) or "all zero"))
    if rep.constraints is not None:
        print("linearizability constraints: %s" %
              ("pass" if rep.constraints.verdict else
               "fail (residuals %s)" % (tuple(_fmt(r) for r in rep.constraints.residuals),)))
    if rep.geodesic is not None:
        print("geodesic form: Omega1 = %s, Omega2 = %s"
              % tuple(_fmt(g) for g in rep.geodesic))
    if rep.canonical_type:
        print("canonical type: %s" % rep.canonical_type)
    if sym_section is not None:
        print("symmetries (degree <= %d): dimension %d"
              % (sym_section["degree_cap"], sym_section["dimension"]))
        for i, g in enumerate(sym_section["generators"]):
            print("  X%d: %s" % (i + 1, g))
    elif sym_error:
        print("symmetry search skipped: %s" % sym_error)
    print("classification: %s" % rep.label)
    return EXIT_OK


def cmd_symmetries(args, cfg: Config) -> int:
    raw = parse_param_args(args.param)
    doc, path, sys_bind, _ = _load_system(args.file, raw)
    t0 = time.perf_counter()
    basis = symmetry.find_symmetries(doc, degree_cap=args.degree or cfg.degree_cap,
                                     max_entries=cfg.ansatz_max_entries)
    gamma = symmetry.structure_constants(basis) if len(basis) else []
    jacobi_ok = _jacobi_holds(basis) if len(basis) else True
    elapsed = time.perf_counter() - t0
    section = (_symmetry_section(basis, gamma) if len(basis) else
               {"dimension": 0, "degree_cap": basis.degree_cap,
                "generators": [], "structure_constants": [],
                "bracket_table": []})
    section["jacobi_identity"] = jacobi_ok
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": "symmetries",
        "input": {"path": str(path), "sha256": _sha256(path),
                  "system": doc.name,
                  "parameters_bound": {k: str(v) for k, v in sorted(sys_bind.items())}},
        "symmetries": section,
        "timings": {"seconds": elapsed},
    }
    if _write_report(report, args):
        return EXIT_OK
    print("system %s: %d generator(s) at degree cap %d"
          % (doc.name, basis.dimension, basis.degree_cap))
    for i, g in enumerate(basis):
        print("  X%d: %s" % (i + 1, format_vector_field(g)))
    for line in section["bracket_table"]:
        print("  %s" % line)
    if not section["bracket_table"] and basis.dimension > 1:
        print("  all brackets vanish (Abelian)")
    return EXIT_OK


def _jacobi_holds(basis) -> bool:
    fields = list(basis.fields)
    n = len(fields)
    for a in range(n):
        for b in range(a + 1, n):
            for c in range(b + 1, n):
                total = [sp.Integer(0)] * 3
                for (i, j, k) in ((a, b, c), (b, c, a), (c, a, b)):
                    inner = symmetry.commutator(fields[i], fields[j])
                    outer = symmetry.commutator(inner, fields[k])
                    total = [expr.normalize(t + comp)
                             for t, comp in zip(total, outer.components())]
                if any(t != 0 for t in total):
                    return False
    return True


def cmd_solve(args, cfg: Config) -> int:
    raw = parse_param_args(args.param)
    doc, path, sys_bind, sol_bind = _load_system(args.file, raw)

    preset = presets.RUNS.get(doc.name)
    if preset is not None:
        if not sys_bind and preset.system_params:
            doc0, _, _, _ = _load_system(args.file, {})
            doc = bind_parameters(doc0, preset.system_params)
            sys_bind = dict(preset.system_params)
        if not sol_bind:
            sol_bind = dict(preset.params)
    grid_spec = parse_grid(args.grid) if args.grid else (preset.grid if preset else None)
    anchor = (parse_complex_literal(args.anchor) if args.anchor
              else (preset.anchor if preset else 0j))
    series_order = args.series_order or (preset.series_order if preset else None)
    if grid_spec is None:
        raise ComplinError("no --grid given and no preset for %r" % doc.name)

    t0 = time.perf_counter()
    ode = analyticity.complexify(doc)
    sol = solve.solve_ode(ode, series_order=series_order,
                          disc_radius=cfg.series_disc_radius)
    xs = verify.make_grid(*grid_spec)
    traj = solve.invert_to_trajectory(sol, xs, anchor, sol_bind,
                                      tol=cfg.newton_tol,
                                      max_iter=cfg.newton_max_iter,
                                      jacobian_tol=cfg.jacobian_tol)
    ic = (traj.f1s[0], traj.f2s[0], traj.f1ps[0], traj.f2ps[0])
    rk = verify.integrate_rk4(doc, ic, grid_spec[0], grid_spec[1], grid_spec[2])
    deviation = verify.compare_trajectories(traj, rk)
    stencil = verify.residual_check(doc, traj)
    elapsed = time.perf_counter() - t0

    plots = {}
    if args.plot:
        plots["trajectory_csv"] = verify.emit_plot_data(traj, args.plot)

    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": "solve",
        "input": {"path": str(path), "sha256": _sha256(path),
                  "system": doc.name,
                  "parameters_bound": {k: str(v) for k, v in sorted(sys_bind.items())}},
        "options": {"grid": list(grid_spec), "anchor": _complex_str(anchor),
                    "series_order": series_order},
        "solution": _solution_section(sol, sol_bind),
        "verification": {
            "rk4_deviation": deviation,
            "stencil_residual": stencil,
            "max_newton_residual": traj.diagnostics["max_residual"],
            "rk4_halving_deviation": rk.diagnostics["halving_deviation"],
            "initial_conditions": [float(v) for v in ic],
            "tolerance": cfg.trajectory_tol,
        },
        "trajectory": {
            "x": [float(v) for v in traj.xs],
            "f1": [float(v) for v in traj.f1s],
            "f2": [float(v) for v in traj.f2s],
        },
        "plots": plots,
        "timings": {"seconds": elapsed},
    }
    json_only = _write_report(report, args)
    if not json_only:
        print("system %s: recipe %s, chain %s -> %s"
              % (doc.name, sol.recipe, " . ".join(sol.chain.names),
                 sol.target.describe() if sol.target else "implicit relation"))
        print("parameters: %s" % (", ".join(
            "%s = %s" % (k, _complex_str(v))
            for k, v in sorted(sol_bind.items()))))
        print("grid [%g, %g] step %g, %d points"
              % (grid_spec[0], grid_spec[1], grid_spec[2], len(traj)))
        print("max Newton residual: %.3e" % traj.diagnostics["max_residual"])
        print("deviation vs RK4 from matched initial conditions: %.3e (tol %g)"
              % (deviation, cfg.trajectory_tol))
    if deviation > cfg.trajectory_tol:
        raise VerifyFailed("trajectory deviates from the RK4 baseline by %g"
                           % deviation)
    return EXIT_OK


def cmd_verify(args, cfg: Config) -> int:
    raw = parse_param_args(args.param)
    doc, path, sys_bind, _ = _load_system(args.file, raw)
    try:
        solution_report = json.loads(Path(args.solution).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ComplinError("cannot load solution report %s: %s"
                           % (args.solution, exc))
    try:
        tr = solution_report["trajectory"]
        stored = verify.Trajectory(xs=np.array(tr["x"]),
                                   f1s=np.array(tr["f1"]),
                                   f2s=np.array(tr["f2"]))
        ic = solution_report["verification"]["initial_conditions"]
        if not sys_bind and solution_report["input"].get("parameters_bound"):
            doc = bind_parameters(doc, solution_report["input"]["parameters_bound"])
    except (KeyError, verify.VerifyError) as exc:
        raise ComplinError("solution report is malformed: %s" % exc)

    t0 = time.perf_counter()
    h = stored.xs[1] - stored.xs[0]
    rk = verify.integrate_rk4(doc, ic, float(stored.xs[0]),
                              float(stored.xs[-1]), float(h))
    deviation = verify.compare_trajectories(stored, rk)
    pointwise = np.hypot(stored.f1s - rk.f1s, stored.f2s - rk.f2s)
    elapsed = time.perf_counter() - t0
    tol = args.tolerance if args.tolerance is not None else cfg.trajectory_tol

    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": "verify",
        "input": {"path": str(path), "sha256": _sha256(path),
                  "system": doc.name,
                  "solution_report": str(args.solution)},
        "verification": {"rk4_deviation": deviation, "tolerance": tol,
                         "passes": deviation <= tol,
                         "rk4_halving_deviation":
                             rk.diagnostics["halving_deviation"]},
        "residual_table": {"x": [float(v) for v in stored.xs],
                           "deviation": [float(v) for v in pointwise]},
        "timings": {"seconds": elapsed},
    }
    json_only = _write_report(report, args)
    if not json_only:
        print("system %s: stored trajectory vs fresh RK4 deviation %.3e "
              "(tol %g)" % (doc.name, deviation, tol))
    if deviation > tol:
        raise VerifyFailed("deviation %g exceeds tolerance %g" % (deviation, tol))
    if not json_only:
        print("verification passed")
    return EXIT_OK


def cmd_plot_planes(args, cfg: Config) -> int:
    values = [float(v) for v in args.constants.split(",")]
    if len(values) != 4:
        raise ComplinError("--constants needs c1,c2,c3,c4")
    geom = verify.plane_geometry(*values)
    out = args.out or "planes.json"
    verify.emit_plot_data(geom, out)
    print("planes with normals n1 = %s, n2 = %s, dot = %g"
          % (list(geom.n1), list(geom.n2), geom.dot))
    print("intersection line: point %s, direction %s"
          % (list(geom.line_point), list(geom.line_direction)))
    print("wrote %s" % out)
    return EXIT_OK


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="complin",
        description="Classify and solve two-dimensional second-order ODE "
                    "systems via complex linearization.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_params=True):
        p.add_argument("--config", help="path to complin.toml")
        p.add_argument("--report", help="write the JSON report to this path")
        p.add_argument("--json", action="store_true",
                       help="print the JSON report to stdout")
        if with_params:
            p.add_argument("--param", action="append", metavar="NAME=VALUE",
                           help="bind parameters (repeatable, comma-separable; "
                                "complex literals like 2+0.5i)")

    p = sub.add_parser("classify", help="full analysis and class label")
    p.add_argument("file")
    p.add_argument("--degree", type=int, help="symmetry ansatz degree cap")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("symmetries", help="symmetry basis and brackets")
    p.add_argument("file")
    p.add_argument("--degree", type=int)
    common(p)
    p.set_defaults(func=cmd_symmetries)

    p = sub.add_parser("solve", help="build, certify, and invert a solution")
    p.add_argument("file")
    p.add_argument("--grid", help="start:stop:step (defaults to the corpus preset)")
    p.add_argument("--anchor", help="Newton anchor, complex literal")
    p.add_argument("--series-order", type=int, dest="series_order")
    p.add_argument("--plot", help="write the trajectory CSV here")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="recheck a solve report against RK4")
    p.add_argument("file")
    p.add_argument("--solution", required=True, help="solve report JSON")
    p.add_argument("--tolerance", type=float)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot-planes", help="emit the plane-geometry data")
    p.add_argument("--constants", required=True, metavar="c1,c2,c3,c4")
    p.add_argument("--out")
    common(p, with_params=False)
    p.set_defaults(func=cmd_plot_planes)
    return ap


def main(argv=None) -> int:
    ap = build_arg_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(getattr(args, "config", None),
                          overrides={"degree_cap": getattr(args, "degree", None)})
        return args.func(args, cfg)
    except ParseError as exc:
        print("parse error: %s" % exc, file=sys.stderr)
        return EXIT_PARSE
    except (solve.NewtonDiverged, solve.BranchAmbiguity) as exc:
        print("inversion failed: %s" % exc, file=sys.stderr)
        return EXIT_NEWTON
    except (solve.NoRecipeMatches, solve.UnsupportedH, solve.PatternMismatch,
            solve.UnsupportedTarget, solve.NonPolynomialCoefficients,
            solve.OrderTooSmall) as exc:
        print("no applicable recipe: %s" % exc, file=sys.stderr)
        return EXIT_NO_RECIPE
    except VerifyFailed as exc:
        print("verification failed: %s" % exc, file=sys.stderr)
        return EXIT_VERIFY
    except (analyticity.ConjugateResidue, solve.CertificateError,
            symmetry.SymmetryError) as exc:
        print("internal inconsistency: %s" % exc, file=sys.stderr)
        return EXIT_INTERNAL
    except ComplinError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
