"""Benchmark harness: critical-mass search, (k, d) grids and mass scans."""

from __future__ import annotations

import dataclasses
import itertools
import time

import numpy as np

from . import instrument
from .dirac import DiracParams, OddEvenOperator, dense_from_operator, gamma5_field
from .errors import CoarseKitError, UsageError
from .krylov import SolverConfig
from .lattice import GaugeConfiguration
from .stack import CoarseSolver, StackConfig, random_source


def smallest_singular_value(params: DiracParams, cfg: GaugeConfiguration) -> float:
    """``sigma_min`` of dense ``D_c``.

    Without a twist ``Gamma_5 D_c`` is Hermitian, so its smallest eigenvalue
    modulus is the smallest singular value and a Hermitian solver suffices.
    """
    oe = OddEvenOperator(params, cfg)
    D = dense_from_operator(oe.apply_reduced, oe.half_length)
    if params.mu == 0.0:
        Q = gamma5_field(D)
        Q = 0.5 * (Q + Q.conj().T)
        return float(np.abs(np.linalg.eigvalsh(Q)).min())
    return float(np.linalg.svd(D, compute_uv=False)[-1])


@dataclasses.dataclass
class CriticalMass:
    m_crit: float
    sigma_min: float
    bracket: tuple
    evaluations: int


def find_critical_mass(cfg: GaugeConfiguration, csw: float = 1.0, lo: float = -1.6, hi: float = 0.4,
                       step: float = 0.1, tol: float = 1e-4, h: float = 1e-6) -> CriticalMass:
    """Locate the ``m0`` minimizing ``sigma_min(D_c)``.

    A coarse scan brackets the minimum, then bisection on the sign of the
    centered slope of ``sigma_min(m0)`` shrinks the bracket below ``tol``.
    """
    if not hi > lo or step <= 0:
        raise UsageError("critical-mass search needs lo < hi and step > 0")
    evals = 0

    def f(m0):
        nonlocal evals
        evals += 1
        return smallest_singular_value(DiracParams(m0, csw), cfg)

    grid = np.arange(hi, lo - 0.5 * step, -step)
    vals = [f(m) for m in grid]
    i = int(np.argmin(vals))
    a, b = grid[min(i + 1, len(grid) - 1)], grid[max(i - 1, 0)]
    bracket = (float(a), float(b))
    while b - a > tol:
        mid = 0.5 * (a + b)
        if f(mid + h) > f(mid - h):
            b = mid
        else:
            a = mid
    m = 0.5 * (a + b)
    return CriticalMass(m_crit=float(m), sigma_min=f(m), bracket=bracket, evaluations=evals)


@dataclasses.dataclass
class SequenceResult:
    iterations: int
    matvecs: int
    reduction_phases: int
    converged: bool
    per_rhs: list
    error: str | None = None


def run_sequence(params: DiracParams, cfg: GaugeConfiguration, config: StackConfig, rhs_seeds,
                 solver: CoarseSolver | None = None) -> SequenceResult:
    """Solve a sequence of seeded random reduced systems with one stack.

    Counters include the preconditioner build.  Recycling solvers carry
    their subspace from one right-hand side to the next.
    """
    with instrument.counting() as c:
        if solver is None:
            solver = CoarseSolver(OddEvenOperator(params, cfg), config)
        else:
            solver.set_operator(OddEvenOperator(params, cfg))
        iters, per, ok, err = 0, [], True, None
        try:
            for s in rhs_seeds:
                b = random_source(solver.oe.half_length, s)
                _, rep = solver.solve_reduced(b)
                iters += rep.iterations
                per.append(rep.iterations)
                ok = ok and rep.converged
        except CoarseKitError as exc:
            ok, err = False, f"{type(exc).__name__}: {exc}"
    cnt = c.result
    return SequenceResult(iterations=iters, matvecs=cnt.matvecs, reduction_phases=cnt.reduction_phases,
                          converged=ok, per_rhs=per, error=err)


def kd_grid(params: DiracParams, cfg: GaugeConfiguration, ks, ds, base: SolverConfig,
            rhs_seeds=(0,), block_jacobi: bool = True, pipelined: bool = False, poly_seed: int = 0):
    """One row per ``(k, d)``: ``k = 0`` runs GMRES, ``d = 0`` disables the polynomial."""
    ks, ds = list(ks), list(ds)
    if not ks or not ds:
        raise UsageError("kd grid needs at least one k and one d")
    rows = []
    for k, d in itertools.product(ks, ds):
        t0 = time.perf_counter()
        if k > 0:
            solver = "pipe-gcrodr" if pipelined else "gcrodr"
        else:
            solver = "pipe-gmres" if pipelined else "gmres"
        try:
            sc = StackConfig(solver=solver, solver_config=dataclasses.replace(base, k=k),
                             block_jacobi=block_jacobi, poly_degree=d, poly_seed=poly_seed)
            res = run_sequence(params, cfg, sc, rhs_seeds)
        except CoarseKitError as exc:
            res = SequenceResult(0, 0, 0, False, [], f"{type(exc).__name__}: {exc}")
        rows.append({"k": k, "d": d, "iterations": res.iterations, "matvecs": res.matvecs,
                     "reduction_phases": res.reduction_phases, "converged": res.converged,
                     "seconds": round(time.perf_counter() - t0, 3), "error": res.error or ""})
    return rows


def mass_scan(cfg: GaugeConfiguration, masses, configs: dict, csw: float = 1.0, mu: float = 0.0,
              rhs_seeds=(0,)):
    """One row per ``(m0, name)`` for each named :class:`StackConfig`."""
    masses = list(masses)
    if not masses or not configs:
        raise UsageError("mass scan needs at least one mass and one solver")
    rows = []
    for m0 in masses:
        params = DiracParams(float(m0), csw, mu)
        for name, sc in configs.items():
            t0 = time.perf_counter()
            try:
                res = run_sequence(params, cfg, sc, rhs_seeds)
            except CoarseKitError as exc:
                res = SequenceResult(0, 0, 0, False, [], f"{type(exc).__name__}: {exc}")
            rows.append({"m0": float(m0), "solver": name, "iterations": res.iterations,
                         "matvecs": res.matvecs, "reduction_phases": res.reduction_phases,
                         "converged": res.converged, "seconds": round(time.perf_counter() - t0, 3),
                         "error": res.error or ""})
    return rows
