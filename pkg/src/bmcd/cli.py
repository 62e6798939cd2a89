"""Command-line interface: manifold ingestion, checks, CSV reports.

Exit codes: 0 success / condition holds; 2 certified violation (bm-test,
cd-scan); 3 counterexample schedule exhausted; 4 counterexample precondition
failed; 64 usage error; 65 model error (non-SPD metric, focalization, ...).

Floats are printed with 17 significant digits so identical inputs produce
byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import BmcdError, PreconditionError
from .manifold import ChartManifold
from .distortion import sigma, tau, tau_expansion_defect
from .transport import build_potential
from .verify import (LambdaReport, BMReport, RasterBudget, bm_check,
                     counterexample_search, curvature_aligned_cube)
from .zoo import parse_builtin
from .jacobi import reparametrized_field, riccati_residual

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_EXHAUSTED = 3
EXIT_PRECONDITION = 4
EXIT_USAGE = 64
EXIT_MODEL = 65


def fmt(value):
    return "%.17g" % float(value)


def csv_row(values):
    return ",".join(fmt(v) for v in values)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_manifold(text) -> ChartManifold:
    """Builtin syntax like ``sphere(2,1)`` or a JSON manifold file path."""
    if os.path.exists(text):
        with open(text, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if "builtin" in doc:
            spec = doc["builtin"]
            params = spec.get("params", [])
            return parse_builtin(f"{spec['name']}({','.join(str(p) for p in params)})").manifold
        dim = int(doc["dim"])
        entries = {}
        for key, src in doc["metric"].items():
            digits = key.lstrip("g_")
            i, j = int(digits[0]), int(digits[1])
            entries[(max(i, j), min(i, j))] = src
        weight = doc.get("weight", {}).get("V")
        return ChartManifold(dim, doc["domain"], entries, weight_expr=weight)
    return parse_builtin(text).manifold


def _emit(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_distortion(args):
    s = sigma(args.t, args.K, args.N, args.theta)
    tv = tau(args.t, args.K, args.N, args.theta)
    defect = tau_expansion_defect(args.K, args.N, args.t, args.theta)
    _emit(["sigma,tau,expansion_defect", csv_row([s, tv, defect])], args.out)
    return EXIT_OK


def cmd_ric(args):
    M = load_manifold(args.manifold)
    p = np.asarray(args.point, dtype=float)
    ric = M.modified_ricci_at(p, args.N)
    G = M.metric_at(p)
    w, _ = np.linalg.eigh(np.linalg.solve(G, ric))
    lines = ["i,j,value"]
    for i in range(M.dim):
        for j in range(M.dim):
            lines.append(f"{i + 1},{j + 1},{fmt(ric[i, j])}")
    lines.append(f"min_eigenvalue,,{fmt(w[0])}")
    _emit(lines, args.out)
    return EXIT_OK


def cmd_cd_scan(args):
    M = load_manifold(args.manifold)
    k = args.grid
    axes = [np.linspace(M.lo[i] + 2 * M.h_curv, M.hi[i] - 2 * M.h_curv, k)
            for i in range(M.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    ric = M.modified_ricci(pts, args.N)
    G = M.metric(pts)
    lines = [",".join(f"x{i + 1}" for i in range(M.dim)) + ",min_eig"]
    worst = np.inf
    witness = None
    for row, (Rm, Gm) in enumerate(zip(ric, G)):
        w = np.linalg.eigvalsh(np.linalg.solve(Gm, Rm - args.K * Gm))
        lines.append(csv_row(list(pts[row]) + [w[0]]))
        if w[0] < worst:
            worst, witness = w[0], pts[row]
    _emit(lines, args.out)
    if worst < -1e-8:
        sys.stderr.write(
            f"modified Ricci bound fails: min eigenvalue {fmt(worst)} at "
            f"[{', '.join(fmt(c) for c in witness)}]\n")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_jacobian(args):
    M = load_manifold(args.manifold)
    x0 = np.asarray(args.x0, dtype=float)
    v0 = np.asarray(args.v0, dtype=float)
    v0 = v0 / M.norm(x0, v0)
    H0 = np.zeros((M.dim, M.dim))
    spec = build_potential(M, x0, v0, args.N, getattr(args, "lambda"))
    fld = reparametrized_field(M, x0, v0, spec.lam,
                               spec.alpha0 * np.eye(M.dim), args.N,
                               steps=args.steps)
    resid, _ = riccati_residual(fld)
    lines = ["t,det_unweighted,weighted,D,E,ric_term,riccati_residual"]
    for k, t in enumerate(fld.times):
        lines.append(csv_row([t, fld.det_unweighted[k], fld.weighted[k],
                              fld.distortion[k], fld.remainder[k],
                              fld.ric_term[k], resid]))
    _emit(lines, args.out)
    return EXIT_OK


def cmd_bm_test(args):
    M = load_manifold(args.manifold)
    x0 = np.asarray(args.x0, dtype=float)
    v0 = np.asarray(args.v0, dtype=float)
    budget = RasterBudget(samples_per_axis=args.samples,
                          cells_per_axis=args.cells, jobs=args.jobs)
    spec = build_potential(M, x0, v0, args.N, getattr(args, "lambda"))
    A = curvature_aligned_cube(M, spec, args.eps)
    report = bm_check(M, spec, A, args.t, args.K, args.N, budget)
    _emit([BMReport.ROW_HEADER, csv_row(report.row())], args.out)
    return EXIT_VIOLATION if report.certified_violation else EXIT_OK


def cmd_counterexample(args):
    M = load_manifold(args.manifold)
    budget = RasterBudget(samples_per_axis=args.samples,
                          cells_per_axis=args.cells, jobs=args.jobs)
    try:
        report = counterexample_search(
            M, args.K, args.N, args.delta, np.asarray(args.x0, dtype=float),
            np.asarray(args.v0, dtype=float),
            lambda_schedule=args.lambda_schedule, budget=budget,
            full_schedule=args.full_schedule)
    except PreconditionError as exc:
        sys.stderr.write(f"precondition failed: {exc}\n")
        return EXIT_PRECONDITION
    lines = [LambdaReport.ROW_HEADER]
    for lam_report in report.lambdas:
        lines.append(csv_row(lam_report.row()))
    lines.append(f"certified,{fmt(report.certified_lam) if report.certified else 'none'},"
                 f"closest_margin,{fmt(report.closest_margin)}")
    _emit(lines, args.out)
    return EXIT_OK if report.certified else EXIT_EXHAUSTED


def build_parser():
    parser = _Parser(prog="bmcd", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for any randomized budget choices (reports "
                             "are deterministic for fixed inputs and seed)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distortion", help="distortion coefficients as one CSV row")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_distortion)

    p = sub.add_parser("ric", help="modified Ricci matrix and minimum eigenvalue")
    p.add_argument("--manifold", required=True)
    p.add_argument("--point", type=float, nargs="+", required=True)
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ric)

    p = sub.add_parser("cd-scan", help="grid scan of the modified Ricci lower bound")
    p.add_argument("--manifold", required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--grid", type=int, default=7)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cd_scan)

    p = sub.add_parser("jacobian", help="volume distortion profile along a transport geodesic")
    p.add_argument("--manifold", required=True)
    p.add_argument("--x0", type=float, nargs="+", required=True)
    p.add_argument("--v0", type=float, nargs="+", required=True)
    p.add_argument("--lambda", type=float, required=True)
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--out")
    p.set_defaults(func=cmd_jacobian)

    p = sub.add_parser("bm-test", help="one Brunn-Minkowski comparison report")
    p.add_argument("--manifold", required=True)
    p.add_argument("--x0", type=float, nargs="+", required=True)
    p.add_argument("--v0", type=float, nargs="+", required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--lambda", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=33)
    p.add_argument("--cells", type=int, default=12)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bm_test)

    p = sub.add_parser("counterexample", help="run the violation pipeline over a scale schedule")
    p.add_argument("--manifold", required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--x0", type=float, nargs="+", required=True)
    p.add_argument("--v0", type=float, nargs="+", required=True)
    p.add_argument("--lambda-schedule", type=float, nargs="+", default=None)
    p.add_argument("--full-schedule", action="store_true")
    p.add_argument("--samples", type=int, default=33)
    p.add_argument("--cells", type=int, default=12)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_counterexample)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BmcdError as exc:
        sys.stderr.write(f"model error: {exc}\n")
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
