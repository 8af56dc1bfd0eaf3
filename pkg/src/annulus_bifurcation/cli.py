"""Command-line front end.

Every subcommand writes one JSON document (or CSV for curve and field data)
to stdout or ``--output``.  Exit codes: 0 success, 2 invalid usage,
3 numerical failure, 4 failed certificate.  The thread count for parameter
sweeps comes from the ANNULUS_BIFURCATION_THREADS environment variable.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import CertificateError, NumericalError

SCHEMA_VERSION = 1
THREADS_ENV = "ANNULUS_BIFURCATION_THREADS"
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_CERTIFICATE = 0, 2, 3, 4

_FLOAT_TAG = "\u0000F"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def parallel_map(fn, items):
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# --- serialization -------------------------------------------------------------

def _prepare(obj):
    """Plain JSON types, with floats tagged for 17-digit output."""
    if isinstance(obj, dict):
        return {str(k): _prepare(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prepare(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_prepare(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return _FLOAT_TAG + format(x, ".17g")
    return obj


def dumps(doc: dict) -> str:
    text = json.dumps(_prepare(doc), indent=2, sort_keys=True)
    return re.sub(r'"\\u0000F([^"]*)"', r"\1", text) + "\n"


def envelope(command: str, parameters: dict, tolerances: dict, result: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "parameters": parameters,
        "tolerances": tolerances,
        "result": result,
    }


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(float(x), ".17g") for x in row])
    return buf.getvalue()


# --- subcommands -----------------------------------------------------------------

def cmd_zeros(args):
    from .special_functions import bessel_zero

    zeros = [bessel_zero(args.order, k) for k in range(1, args.count + 1)]
    return "json", envelope("zeros", {"order": args.order, "count": args.count}, {"abs_tol": 1e-12}, {"zeros": zeros})


def cmd_spectrum(args):
    from .radial_spectrum import AnnulusGeometry, annulus_spectrum_rank, radial_eigenpair, radial_eigenvalues

    geom = AnnulusGeometry(args.a)
    if args.lmax < 0 or args.nmax < 0:
        raise ValueError("--lmax and --nmax must be non-negative")

    def row(l):
        vals = radial_eigenvalues(geom, l, args.nmax + 1, args.bc)
        return [(l, n, float(v), 1 if l == 0 else 2) for n, v in enumerate(vals)]

    rows = [r for chunk in parallel_map(row, range(args.lmax + 1)) for r in chunk]
    rows.sort(key=lambda r: (r[2], r[0], r[1]))
    result = {"eigenvalues": [{"l": l, "n": n, "value": v, "multiplicity": m} for l, n, v, m in rows]}
    if args.rank is not None:
        rl, rn = args.rank
        target = radial_eigenpair(geom, rl, rn, args.bc)
        result["rank"] = {"l": rl, "n": rn, "value": target.value, "rank": annulus_spectrum_rank(geom, target)}
    params = {"a": args.a, "bc": args.bc, "lmax": args.lmax, "nmax": args.nmax}
    if args.format == "csv":
        return "csv", csv_text(["l", "n", "value", "multiplicity"], rows)
    return "json", envelope("spectrum", params, {"root_rel_tol": 1e-13, "rank_tie_rel_tol": 1e-9}, result)


def cmd_crossing(args):
    from .crossing import find_crossing

    certs = parallel_map(lambda l: find_crossing(l, safety_margin=args.safety_margin), args.l)
    result = {"certificates": [c.to_dict() for c in certs]}
    doc = envelope("crossing", {"l": args.l, "safety_margin": args.safety_margin}, certs[0].tolerances, result)
    failed = [c.l for c in certs if not c.passed]
    if failed:
        return "json", doc, CertificateError(f"certificate failed for l={failed}")
    return "json", doc


def cmd_expansion(args):
    from .perturbation_series import fit_expansion

    table = fit_expansion(args.family, args.bc, args.n, orders=tuple(args.orders), radii=tuple(args.radii),
                          method=args.method)
    params = {"family": args.family, "bc": args.bc, "n": args.n, "orders": args.orders, "radii": args.radii,
              "method": args.method}
    return "json", envelope("expansion", params, table.tolerances, table.to_dict())


def _branch_setup(l, s):
    from .crossing import find_crossing
    from .deformed_solver import linearized_branch

    cert = find_crossing(l, check_nr=False)
    return cert, linearized_branch(cert, s)


def cmd_branch(args):
    from .deformed_solver import CONVERGENCE_TOL, boundary_curves, overdetermined_residual, solve_deformed_neumann

    cert, pert = _branch_setup(args.l, args.s)
    th, inner, outer = boundary_curves(cert.a_l, pert, args.points)
    if args.format == "csv":
        return "csv", csv_text(["theta", "inner_r", "outer_r"], zip(th, inner, outer))
    mu, field = solve_deformed_neumann(cert.a_l, pert, M=args.M, N=args.N)
    result = {
        "a_l": cert.a_l,
        "alpha": pert.b_coeff,
        "beta": pert.B_coeff,
        "s": pert.s,
        "sup_perturbation": pert.sup_norm,
        "admissibility_bound": min(cert.a_l, (1 - cert.a_l) / 2),
        "eigenvalue": mu,
        "trivial_eigenvalue": cert.shared_value,
        "overdetermined_residual": overdetermined_residual(cert.a_l, pert, field),
    }
    params = {"l": args.l, "s": args.s, "M": args.M, "N": args.N, "points": args.points}
    return "json", envelope("branch", params, {"convergence_rel_tol": CONVERGENCE_TOL}, result)


def _flow(l, s, M, N):
    from .flow_pompeiu import build_flow
    from .deformed_solver import solve_deformed_neumann

    cert, pert = _branch_setup(l, s)
    if s == 0:
        return build_flow(a=cert.a_l)
    mu, field = solve_deformed_neumann(cert.a_l, pert, M=M, N=N)
    return build_flow(a=cert.a_l, pert=pert, field=field, mu=mu)


def cmd_euler(args):
    from .flow_pompeiu import QuadratureSpec, default_test_field, weak_euler_residual

    flow = _flow(args.l, args.s, args.M, args.N)
    if args.format == "csv":
        xs = np.linspace(-args.extent, args.extent, args.grid)
        X, Y = np.meshgrid(xs, xs, indexing="xy")
        v1, v2 = flow.velocity(X, Y)
        p = flow.pressure(X, Y)
        rows = zip(X.ravel(), Y.ravel(), v1.ravel(), v2.ravel(), p.ravel())
        return "csv", csv_text(["x", "y", "v1", "v2", "p"], rows)
    spec = QuadratureSpec(args.radial, args.angular)
    res = [weak_euler_residual(flow, default_test_field(df), spec=spec) for df in (False, True)]
    result = {
        "mu": flow.mu, "c1": flow.c1, "c2": flow.c2,
        "residuals": [
            {"test_field": name, "continuity": r.continuity, "momentum": r.momentum,
             "continuity_normalized": r.continuity_normalized, "momentum_normalized": r.momentum_normalized,
             "continuity_quadrature_error": r.continuity_error, "momentum_quadrature_error": r.momentum_error}
            for name, r in zip(("bump", "divergence_free_bump"), res)
        ],
    }
    params = {"l": args.l, "s": args.s, "M": args.M, "N": args.N, "grid": args.grid, "extent": args.extent}
    return "json", envelope("euler", params, {"radial_nodes": spec.radial, "angular_nodes": spec.angular}, result)


def cmd_pompeiu(args):
    from .flow_pompeiu import QuadratureSpec, pompeiu_data, pompeiu_integral, random_motions

    flow = _flow(args.l, args.s, args.M, args.N)
    data = pompeiu_data(flow)
    control = pompeiu_data(flow, frequency=2 * np.sqrt(flow.mu))
    spec = QuadratureSpec(args.radial, args.angular)
    motions = random_motions(args.motions, args.seed)
    vals = parallel_map(lambda m: pompeiu_integral(data, m, spec, with_error=True), motions)
    ctrl = parallel_map(lambda m: pompeiu_integral(control, m, spec), motions)
    scale = data.scale
    result = {
        "c": data.c, "mu": flow.mu, "c1": flow.c1, "c2": flow.c2, "scale": scale,
        "motions": [
            {"angle": m.angle, "translation": m.translation, "value": v, "normalized": abs(v) / scale,
             "quadrature_error": e}
            for m, (v, e) in zip(motions, vals)
        ],
        "max_normalized": max(abs(v) for v, _ in vals) / scale,
        "control_frequency": control.frequency,
        "control_max_normalized": max(abs(v) for v in ctrl) / control.scale,
    }
    params = {"l": args.l, "s": args.s, "motions": args.motions, "seed": args.seed}
    return "json", envelope("pompeiu", params, {"radial_nodes": spec.radial, "angular_nodes": spec.angular}, result)


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="annulus-bifurcation", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zeros", parents=[common], help="positive zeros of J_n")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--count", type=int, default=5)
    p.set_defaults(func=cmd_zeros)

    p = sub.add_parser("spectrum", parents=[common], help="radial eigenvalue table of an annulus")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--bc", choices=("neumann", "dirichlet"), default="neumann")
    p.add_argument("--lmax", type=int, default=7)
    p.add_argument("--nmax", type=int, default=3)
    p.add_argument("--rank", type=int, nargs=2, metavar=("L", "N"), help="also report the rank of (L, N)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("crossing", parents=[common], help="crossing radius certificate")
    p.add_argument("--l", type=int, nargs="+", required=True)
    p.add_argument("--safety-margin", type=float, default=0.5)
    p.set_defaults(func=cmd_crossing)

    p = sub.add_parser("expansion", parents=[common], help="fitted expansion coefficients")
    p.add_argument("--family", choices=("T_eta_eps", "Ttilde_eta_eps", "T_eta_delta", "Ttilde_eta_delta"),
                   required=True)
    p.add_argument("--bc", choices=("neumann", "dirichlet"), default="dirichlet")
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--orders", type=int, nargs=2, default=[2, 2])
    p.add_argument("--radii", type=float, nargs="+", default=[1e-3, 2e-3, 4e-3])
    p.add_argument("--method", choices=("spectral", "fd"), default="spectral")
    p.set_defaults(func=cmd_expansion)

    def flow_args(p):
        p.add_argument("--l", type=int, default=4)
        p.add_argument("--s", type=float, default=0.0)
        p.add_argument("--M", type=int, default=8)
        p.add_argument("--N", type=int, default=64)

    p = sub.add_parser("branch", parents=[common], help="first-order branch and its residual")
    flow_args(p)
    p.add_argument("--points", type=int, default=256)
    p.set_defaults(func=cmd_branch)

    p = sub.add_parser("euler", parents=[common], help="Euler flow residuals or field samples")
    flow_args(p)
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--extent", type=float, default=1.2)
    p.add_argument("--radial", type=int, default=64)
    p.add_argument("--angular", type=int, default=256)
    p.set_defaults(func=cmd_euler)

    p = sub.add_parser("pompeiu", parents=[common], help="weighted Pompeiu integral over rigid motions")
    flow_args(p)
    p.add_argument("--motions", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radial", type=int, default=64)
    p.add_argument("--angular", type=int, default=256)
    p.set_defaults(func=cmd_pompeiu)
    return parser


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return int(exc.code or 0)
    try:
        thread_count()
        out = args.func(args)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CertificateError as exc:
        print(f"certificate failed: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    kind, payload, *failure = out
    _emit(dumps(payload) if kind == "json" else payload, args.output)
    if failure:
        print(f"certificate failed: {failure[0]}", file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK
