"""The coarsest-level solver stack applied to an odd-even reduced operator.

A :class:`CoarseSolver` owns the block-Jacobi and polynomial preconditioners
built for one operator and the recycle space carried across right-hand
sides.  Changing the operator rebuilds both and drops the recycle space.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import instrument
from .dense import norm
from .dirac import DiracParams, OddEvenOperator
from .errors import UsageError
from .krylov import RecycleSubspace, SolveReport, SolverConfig, gcrodr, gmres, pipelined_gcrodr, pipelined_gmres
from .lattice import SITE_DOF, GaugeConfiguration
from .precond import (BlockJacobiPreconditioner, PolynomialPreconditioner, build_block_jacobi,
                      build_polynomial, preconditioned_operator)

SOLVERS = ("gmres", "pp-gmres", "gcrodr", "pipe-gmres", "pipe-gcrodr")
PP_DEFAULT_DEGREE = 4


@dataclasses.dataclass(frozen=True)
class StackConfig:
    """Solver selection plus preconditioner flags.

    ``poly_degree=None`` means the solver default: 4 for ``pp-gmres`` and no
    polynomial otherwise.  ``0`` always disables it.
    """

    solver: str = "gmres"
    solver_config: SolverConfig = SolverConfig()
    block_jacobi: bool = False
    poly_degree: int | None = None
    poly_seed: int = 0

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise UsageError(f"unknown solver {self.solver!r}; choose from {', '.join(SOLVERS)}")
        if self.poly_degree is not None and self.poly_degree < 0:
            raise UsageError(f"poly degree must be >= 0, got {self.poly_degree}")
        if self.solver == "pp-gmres" and self.poly_degree == 0:
            raise UsageError("pp-gmres needs a polynomial degree >= 1")
        if self.solver in ("gmres", "pp-gmres", "pipe-gmres") and self.solver_config.k:
            raise UsageError(f"solver {self.solver} does not recycle; use gcrodr or pipe-gcrodr for k > 0")
        if self.solver.startswith("pipe") and self.solver_config.orth != "classical":
            raise UsageError("pipelined solvers use classical Gram-Schmidt")

    @property
    def degree(self) -> int:
        if self.poly_degree is None:
            return PP_DEFAULT_DEGREE if self.solver == "pp-gmres" else 0
        return self.poly_degree

    @property
    def recycles(self) -> bool:
        return self.solver in ("gcrodr", "pipe-gcrodr")

    def params(self) -> dict:
        c = self.solver_config
        return {
            "solver": self.solver, "m": c.m, "max_restarts": c.max_restarts, "tol": c.tol,
            "orth": c.orth, "k": c.k, "u": c.u, "relative_to_initial": c.relative_to_initial,
            "block_jacobi": self.block_jacobi, "poly_degree": self.degree, "poly_seed": self.poly_seed,
        }


@dataclasses.dataclass
class StackResult:
    psi: np.ndarray
    psi_e: np.ndarray
    report: SolveReport
    reduced_relative_residual: float
    full_relative_residual: float


class CoarseSolver:
    def __init__(self, oe: OddEvenOperator, config: StackConfig = StackConfig()):
        self.config = config
        self.oe: OddEvenOperator | None = None
        self.bjp: BlockJacobiPreconditioner | None = None
        self.poly: PolynomialPreconditioner | None = None
        self.recycle: RecycleSubspace | None = None
        self.build_counters = instrument.CounterScope()
        self.set_operator(oe)

    def set_operator(self, oe: OddEvenOperator) -> None:
        """Rebuild preconditioners for ``oe`` and invalidate recycled data."""
        cfg = self.config
        with instrument.counting() as c:
            self.bjp = build_block_jacobi(oe) if cfg.block_jacobi else None
            self.poly = None
            if cfg.degree > 0:
                self.poly = build_polynomial(preconditioned_operator(oe, self.bjp), oe.half_length,
                                             cfg.degree, seed=cfg.poly_seed)
        self.build_counters = c.result
        self.oe = oe
        self.recycle = None

    def solve_reduced(self, b_e: np.ndarray, x0: np.ndarray | None = None):
        """Solve ``D_c x = b_e`` with the configured stack; returns ``(x, report)``."""
        cfg = self.config
        left = self.bjp.apply if self.bjp is not None else None
        right = self.poly.apply if self.poly is not None else None
        op = self.oe.apply_reduced
        sc = cfg.solver_config
        if cfg.solver in ("gmres", "pp-gmres"):
            return gmres(op, b_e, x0, sc, left, right)
        if cfg.solver == "pipe-gmres":
            return pipelined_gmres(op, b_e, x0, sc, left, right)
        fn = gcrodr if cfg.solver == "gcrodr" else pipelined_gcrodr
        x, rep, rec = fn(op, b_e, x0, sc, self.recycle, left, right)
        self.recycle = rec
        return x, rep

    def solve(self, eta: np.ndarray) -> StackResult:
        """Full-system solve through the reduced system and odd reconstruction."""
        oe = self.oe
        b_e = oe.reduced_rhs(eta)
        x_e, rep = self.solve_reduced(b_e)
        psi = oe.reconstruct_odd(eta, x_e)
        bn = norm(b_e)
        red = norm(b_e - oe.apply_reduced(x_e)) / (bn if bn else 1.0)
        en = norm(eta)
        full = norm(eta - oe.full.apply(psi)) / (en if en else 1.0)
        return StackResult(psi=psi, psi_e=x_e, report=rep,
                           reduced_relative_residual=red, full_relative_residual=full)


def random_source(geometry_length: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal(geometry_length) + 1j * rng.standard_normal(geometry_length)


def point_source(cfg: GaugeConfiguration, site: int, spin: int, color: int) -> np.ndarray:
    geom = cfg.geometry
    if not (0 <= site < geom.volume and 0 <= spin < 4 and 0 <= color < 3):
        raise UsageError(f"point source ({site}, {spin}, {color}) out of range")
    eta = np.zeros(geom.field_length, dtype=complex)
    eta[SITE_DOF * site + 3 * spin + color] = 1.0
    return eta


def build_stack(params: DiracParams, cfg: GaugeConfiguration, config: StackConfig) -> CoarseSolver:
    return CoarseSolver(OddEvenOperator(params, cfg), config)
