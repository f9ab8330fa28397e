"""Coarsest-level Krylov solver stack for odd-even reduced lattice Dirac operators."""

from .dirac import (DiracOperator, DiracParams, OddEvenOperator, apply_reduced, apply_twisted_mass,
                    apply_wilson, assemble_dense, reconstruct_odd, split_odd_even)
from .errors import CoarseKitError, NegativeNormBreakdown, UsageError
from .krylov import RecycleSubspace, SolveReport, SolverConfig, gcrodr, gmres, pipelined_gcrodr, pipelined_gmres
from .lattice import GaugeConfiguration, LatticeGeometry, build_gamma_basis, generate_gauge, read_gauge, write_gauge
from .precond import build_block_jacobi, build_polynomial, leja_order
from .stack import CoarseSolver, StackConfig

__version__ = "0.1.0"

__all__ = [
    "CoarseKitError", "CoarseSolver", "DiracOperator", "DiracParams", "GaugeConfiguration",
    "LatticeGeometry", "NegativeNormBreakdown", "OddEvenOperator", "RecycleSubspace", "SolveReport",
    "SolverConfig", "StackConfig", "UsageError", "apply_reduced", "apply_twisted_mass", "apply_wilson",
    "assemble_dense", "build_block_jacobi", "build_gamma_basis", "build_polynomial", "gcrodr",
    "generate_gauge", "gmres", "leja_order", "pipelined_gcrodr", "pipelined_gmres", "read_gauge",
    "reconstruct_odd", "split_odd_even", "write_gauge",
]
