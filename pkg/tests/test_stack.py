import numpy as np
import pytest

from coarsekit.dirac import DiracParams, OddEvenOperator
from coarsekit.errors import UsageError
from coarsekit.krylov import SolverConfig
from coarsekit.lattice import generate_gauge
from coarsekit.stack import CoarseSolver, StackConfig, point_source, random_source


def test_config_validation():
    with pytest.raises(UsageError):
        StackConfig(solver="cg")
    with pytest.raises(UsageError):
        StackConfig(solver="pp-gmres", poly_degree=0)
    with pytest.raises(UsageError):
        StackConfig(solver="gmres", solver_config=SolverConfig(k=4))
    with pytest.raises(UsageError):
        StackConfig(solver="pipe-gmres", solver_config=SolverConfig(orth="modified"))
    assert StackConfig(solver="pp-gmres").degree == 4
    assert StackConfig(solver="gcrodr").degree == 0


@pytest.mark.parametrize("solver,k,d,bj", [
    ("gmres", 0, 0, False), ("pp-gmres", 0, 4, True), ("gcrodr", 8, 4, True),
    ("pipe-gmres", 0, 0, False), ("pipe-gcrodr", 6, 0, True),
])
def test_full_residual_within_factor(cfg4, solver, k, d, bj):
    oe = OddEvenOperator(DiracParams(-0.2, 1.0), cfg4)
    sc = StackConfig(solver=solver, solver_config=SolverConfig(m=20, max_restarts=50, tol=1e-6, k=k),
                     block_jacobi=bj, poly_degree=d)
    res = CoarseSolver(oe, sc).solve(random_source(cfg4.geometry.field_length, 1))
    assert res.report.converged
    assert res.full_relative_residual <= 10 * res.reduced_relative_residual
    assert res.full_relative_residual <= 10 * 1e-6


def test_recycle_kept_and_invalidated(cfg4):
    oe = OddEvenOperator(DiracParams(-0.2, 1.0), cfg4)
    sc = StackConfig(solver="gcrodr", solver_config=SolverConfig(m=20, max_restarts=50, tol=1e-8, k=5))
    s = CoarseSolver(oe, sc)
    s.solve(random_source(cfg4.geometry.field_length, 0))
    assert s.recycle is not None
    s.set_operator(OddEvenOperator(DiracParams(-0.25, 1.0), cfg4))
    assert s.recycle is None


def test_twisted_mu_zero_same_history(cfg4):
    sc = StackConfig(solver_config=SolverConfig(m=20, tol=1e-6))
    eta = random_source(cfg4.geometry.field_length, 2)
    a = CoarseSolver(OddEvenOperator(DiracParams(-0.2, 1.0, 0.0), cfg4), sc).solve(eta)
    b = CoarseSolver(OddEvenOperator(DiracParams(-0.2, 1.0, -0.0), cfg4), sc).solve(eta)
    assert a.report.residual_history == b.report.residual_history


def test_point_source():
    cfg = generate_gauge((2, 2, 2, 2), 0, 0.0)
    eta = point_source(cfg, 3, 2, 1)
    assert eta[12 * 3 + 3 * 2 + 1] == 1 and np.count_nonzero(eta) == 1
    with pytest.raises(UsageError):
        point_source(cfg, 16, 0, 0)
