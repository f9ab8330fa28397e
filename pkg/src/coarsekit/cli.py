"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 IO error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys

import numpy as np

from . import bench, instrument, verify
from .dense import norm
from .dirac import DiracOperator, DiracParams, OddEvenOperator, dense_from_operator
from .errors import CoarseKitError, NegativeNormBreakdown, UsageError
from .krylov import SolverConfig, gcrodr, gmres, pipelined_gcrodr, pipelined_gmres
from .lattice import generate_gauge, read_gauge, write_gauge
from .mmio import write_matrix_market
from .precond import build_block_jacobi, build_polynomial, preconditioned_operator
from .stack import SOLVERS, CoarseSolver, StackConfig, point_source, random_source


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _add_gauge(p):
    g = p.add_argument_group("gauge configuration")
    g.add_argument("--gauge", help="LQGC file; overrides --dims/--seed/--disorder")
    g.add_argument("--dims", type=_int_list, default=[4, 4, 4, 4])
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--disorder", type=float, default=0.3)


def _add_operator(p, m0=-0.2):
    g = p.add_argument_group("operator")
    g.add_argument("--m0", type=float, default=m0)
    g.add_argument("--csw", type=float, default=1.0)
    g.add_argument("--mu", type=float, default=0.0)


def _add_solver(p):
    g = p.add_argument_group("solver")
    g.add_argument("--solver", choices=SOLVERS, default="gmres")
    g.add_argument("--m", type=int, default=60, help="restart length")
    g.add_argument("--max-restarts", type=int, default=20)
    g.add_argument("--tol", type=float, default=1e-1)
    g.add_argument("--orth", choices=("classical", "modified"), default="classical")
    g.add_argument("--recycle-k", type=int, default=0)
    g.add_argument("--recycle-u", type=int, default=10)
    g.add_argument("--relative-to-initial", action="store_true")
    g.add_argument("--block-jacobi", type=_on_off, default=False, metavar="on|off")
    g.add_argument("--poly-degree", type=int, default=None, help="0 disables; default 4 for pp-gmres")
    g.add_argument("--poly-seed", type=int, default=0)


def _gauge(args):
    if args.gauge:
        return read_gauge(args.gauge)
    if len(args.dims) != 4:
        raise UsageError(f"--dims needs four values, got {args.dims}")
    return generate_gauge(tuple(args.dims), args.seed, args.disorder)


def _params(args):
    return DiracParams(args.m0, args.csw, args.mu)


def _solver_config(args):
    return SolverConfig(m=args.m, max_restarts=args.max_restarts, tol=args.tol, orth=args.orth,
                        pipelined=args.solver.startswith("pipe"), k=args.recycle_k, u=args.recycle_u,
                        relative_to_initial=args.relative_to_initial)


def _stack_config(args):
    return StackConfig(solver=args.solver, solver_config=_solver_config(args),
                       block_jacobi=args.block_jacobi, poly_degree=args.poly_degree, poly_seed=args.poly_seed)


def _operator_echo(args, cfg):
    return {"dims": list(cfg.geometry.dims), "seed": cfg.seed, "disorder": cfg.disorder,
            "gauge_digest": cfg.digest(), "m0": args.m0, "csw": args.csw, "mu": args.mu}


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _write_csv(path, rows, fields):
    if path in (None, "-"):
        fh = sys.stdout
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def cmd_gen(args):
    cfg = generate_gauge(tuple(args.dims), args.seed, args.disorder)
    write_gauge(cfg, args.out)
    print(f"{cfg.digest()}  {args.out}")
    return 0


def _rhs(args, cfg):
    if args.rhs == "random":
        return random_source(cfg.geometry.field_length, args.rhs_seed)
    site, spin, color = args.point
    return point_source(cfg, site, spin, color)


def _solve_full(args, cfg, params, sc, eta):
    """Unreduced solve for cross-checking; preconditioners built on ``D``."""
    D = DiracOperator(params, cfg)
    with instrument.counting() as build:
        bjp = build_block_jacobi(D.diag) if sc.block_jacobi else None
        left = bjp.apply if bjp is not None else None
        poly = None
        if sc.degree > 0:
            op = (lambda v: bjp.apply(D.apply(v))) if bjp is not None else D.apply
            poly = build_polynomial(op, cfg.geometry.field_length, sc.degree, seed=sc.poly_seed)
    right = poly.apply if poly is not None else None
    c = sc.solver_config
    if sc.solver in ("gmres", "pp-gmres"):
        psi, rep = gmres(D.apply, eta, None, c, left, right)
    elif sc.solver == "pipe-gmres":
        psi, rep = pipelined_gmres(D.apply, eta, None, c, left, right)
    else:
        fn = gcrodr if sc.solver == "gcrodr" else pipelined_gcrodr
        psi, rep, _ = fn(D.apply, eta, None, c, None, left, right)
    full = norm(eta - D.apply(psi)) / norm(eta)
    return psi, rep, build.result, {"full_relative_residual": full}


def cmd_solve(args):
    cfg = _gauge(args)
    params = _params(args)
    sc = _stack_config(args)
    eta = _rhs(args, cfg)
    params_echo = {**_operator_echo(args, cfg), **sc.params(), "rhs": args.rhs,
                   "rhs_seed": args.rhs_seed, "point": list(args.point) if args.point else None,
                   "system": "full" if args.full else "reduced"}
    status = 0
    try:
        if args.full:
            psi, rep, build, extra = _solve_full(args, cfg, params, sc, eta)
        else:
            solver = CoarseSolver(OddEvenOperator(params, cfg), sc)
            res = solver.solve(eta)
            psi, rep, build = res.psi, res.report, solver.build_counters
            extra = {"reduced_relative_residual": res.reduced_relative_residual,
                     "full_relative_residual": res.full_relative_residual}
            if solver.recycle is not None:
                extra["recycle_updates"] = solver.recycle.updates_done
    except NegativeNormBreakdown as exc:
        if exc.report is None:
            raise
        psi, rep, build = exc.x, exc.report, instrument.CounterScope()
        extra = {"error": f"NegativeNormBreakdown: {exc}"}
        status = exc.exit_code
    extra.update({"cycles": rep.cycles, "breakdown": rep.breakdown, "warnings": rep.warnings,
                  "build_counters": build.counts()})
    text = instrument.report_json(rep.counters, solver=sc.solver, converged=rep.converged,
                                  iterations=rep.iterations, restarts=rep.restarts,
                                  final_relative_residual=rep.final_relative_residual,
                                  residual_history=rep.residual_history, params=params_echo, extra=extra)
    _write_text(args.out, text)
    if args.solution_out and psi is not None:
        np.save(args.solution_out, psi)
    return status


def cmd_spectrum(args):
    cfg = _gauge(args)
    params = _params(args)
    oe = OddEvenOperator(params, cfg)
    n = oe.half_length
    rows = [{"re": z.real, "im": z.imag, "which": "D_c"}
            for z in np.linalg.eigvals(dense_from_operator(oe.apply_reduced, n))]
    bjp = build_block_jacobi(oe) if args.block_jacobi else None
    degree = args.poly_degree or 0
    if bjp is not None or degree > 0:
        op = preconditioned_operator(oe, bjp)
        which = "B^-1 D_c" if bjp is not None else "D_c"
        if degree > 0:
            q = build_polynomial(op, n, degree, seed=args.poly_seed)
            apply = lambda V: np.column_stack([op(q.apply(V[:, i])) for i in range(V.shape[1])])  # noqa: E731
            which += " q"
        else:
            apply = op
        rows += [{"re": z.real, "im": z.imag, "which": which}
                 for z in np.linalg.eigvals(dense_from_operator(apply, n))]
    for r in rows:
        r["re"], r["im"] = f"{r['re']:.17g}", f"{r['im']:.17g}"
    _write_csv(args.out, rows, ["re", "im", "which"])
    return 0


def cmd_bench(args):
    cfg = _gauge(args)
    base = SolverConfig(m=args.m, max_restarts=args.max_restarts, tol=args.tol)
    seeds = list(range(args.rhs_count))
    if args.mode == "kd-grid":
        rows = bench.kd_grid(_params(args), cfg, args.ks, args.ds, base, rhs_seeds=seeds,
                             block_jacobi=args.block_jacobi, pipelined=args.pipelined, poly_seed=args.poly_seed)
        fields = ["k", "d", "iterations", "matvecs", "reduction_phases", "converged", "seconds", "error"]
    elif args.mode == "mass-scan":
        masses = args.masses
        if masses is None:
            if not args.offsets:
                raise UsageError("mass scan needs --masses or --offsets")
            cm = bench.find_critical_mass(cfg, csw=args.csw)
            print(f"# m_crit = {cm.m_crit:.6f}, sigma_min = {cm.sigma_min:.3e}", file=sys.stderr)
            masses = [cm.m_crit + off for off in args.offsets]
        if not masses:
            raise UsageError("empty mass list")
        configs = {}
        for name in args.solvers:
            # recycling and polynomial solvers take the largest k and d given
            k = max(args.ks) if name in ("gcrodr", "pipe-gcrodr") else 0
            d = 0 if name in ("gmres", "pipe-gmres") else (max(args.ds) or None)
            configs[name] = StackConfig(solver=name, solver_config=dataclasses.replace(base, k=k),
                                        block_jacobi=args.block_jacobi, poly_degree=d, poly_seed=args.poly_seed)
        rows = bench.mass_scan(cfg, masses, configs, csw=args.csw, mu=args.mu, rhs_seeds=seeds)
        fields = ["m0", "solver", "iterations", "matvecs", "reduction_phases", "converged", "seconds", "error"]
    else:
        cm = bench.find_critical_mass(cfg, csw=args.csw)
        rows = [{"m_crit": cm.m_crit, "sigma_min": cm.sigma_min, "evaluations": cm.evaluations}]
        fields = ["m_crit", "sigma_min", "evaluations"]
    _write_csv(args.out, rows, fields)
    return 0


def cmd_export_mm(args):
    cfg = _gauge(args)
    params = _params(args)
    if args.which == "full":
        op = DiracOperator(params, cfg)
        A = dense_from_operator(op.apply, cfg.geometry.field_length)
    else:
        oe = OddEvenOperator(params, cfg)
        A = dense_from_operator(oe.apply_reduced, oe.half_length)
    nnz = write_matrix_market(args.out, A, comment=f"{args.which} Dirac operator m0={args.m0} csw={args.csw} mu={args.mu}")
    print(f"wrote {A.shape[0]}x{A.shape[1]} with {nnz} entries to {args.out}")
    return 0


def cmd_verify(args):
    results = verify.run(args.only)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 3


def build_parser():
    p = _Parser(prog="coarsekit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a gauge configuration file")
    g.add_argument("--dims", type=_int_list, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--disorder", type=float, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one system and print a JSON report")
    _add_gauge(s)
    _add_operator(s)
    _add_solver(s)
    s.add_argument("--rhs", choices=("random", "point"), default="random")
    s.add_argument("--rhs-seed", type=int, default=0)
    s.add_argument("--point", type=_int_list, default=None, help="site,spin,color for --rhs point")
    s.add_argument("--full", action="store_true", help="solve the unreduced system instead")
    s.add_argument("--out", default=None, help="JSON report path (default stdout)")
    s.add_argument("--solution-out", default=None, help="save the full solution as .npy")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("spectrum", help="dense eigenvalues of D_c and its preconditioned form as CSV")
    _add_gauge(e)
    _add_operator(e)
    e.add_argument("--block-jacobi", type=_on_off, default=False, metavar="on|off")
    e.add_argument("--poly-degree", type=int, default=0)
    e.add_argument("--poly-seed", type=int, default=0)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_spectrum)

    b = sub.add_parser("bench", help="kd-grid, mass-scan or critical-mass sweeps as CSV")
    b.add_argument("mode", choices=("kd-grid", "mass-scan", "critical"))
    _add_gauge(b)
    _add_operator(b)
    b.add_argument("--ks", type=_int_list, default=[0, 8])
    b.add_argument("--ds", type=_int_list, default=[0, 4])
    b.add_argument("--masses", type=_float_list, default=None)
    b.add_argument("--offsets", type=_float_list, default=None, help="offsets above the located critical mass")
    b.add_argument("--solvers", type=lambda t: [x for x in t.split(",") if x], default=["gmres", "gcrodr"])
    b.add_argument("--m", type=int, default=60)
    b.add_argument("--max-restarts", type=int, default=20)
    b.add_argument("--tol", type=float, default=1e-1)
    b.add_argument("--rhs-count", type=int, default=1)
    b.add_argument("--block-jacobi", type=_on_off, default=True, metavar="on|off")
    b.add_argument("--pipelined", action="store_true")
    b.add_argument("--poly-seed", type=int, default=0)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("export-mm", help="write a dense assembly in Matrix Market format")
    _add_gauge(x)
    _add_operator(x)
    x.add_argument("--which", choices=("full", "reduced"), default="reduced")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export_mm)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--only", nargs="+", action="extend", default=None, choices=sorted(verify.CHECKS))
    v.set_defaults(func=cmd_verify)
    return p


def _validate(args):
    if getattr(args, "rhs", None) == "point" and (not args.point or len(args.point) != 3):
        raise UsageError("--rhs point needs --point site,spin,color")
    if args.command == "bench":
        for name in args.solvers:
            if name not in SOLVERS:
                raise UsageError(f"unknown solver {name!r}")
        if not args.ks or not args.ds:
            raise UsageError("empty sweep range")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
        return args.func(args)
    except CoarseKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
