import numpy as np

from coarsekit.bench import find_critical_mass, run_sequence, smallest_singular_value
from coarsekit.dirac import DiracParams, assemble_dense
from coarsekit.krylov import SolverConfig
from coarsekit.lattice import generate_gauge
from coarsekit.stack import StackConfig


def test_sigma_min_matches_svd(cfg2):
    for mu in (0.0, 0.1):
        p = DiracParams(-0.3, 1.0, mu)
        D = assemble_dense(p, cfg2, "reduced")
        assert abs(smallest_singular_value(p, cfg2) - np.linalg.svd(D, compute_uv=False)[-1]) <= 1e-12


def test_free_field_critical_mass():
    # the free reduced operator is singular exactly at m0 = 0 (zero momentum)
    cfg = generate_gauge((2, 2, 2, 2), 0, 0.0)
    cm = find_critical_mass(cfg, csw=0.0, lo=-0.5, hi=0.5, tol=1e-5)
    assert abs(cm.m_crit) <= 1e-4
    assert cm.sigma_min <= 1e-3


def test_sequence_counts_include_build(cfg4):
    sc = StackConfig(solver="pp-gmres", solver_config=SolverConfig(m=20, tol=1e-6))
    res = run_sequence(DiracParams(-0.2, 1.0), cfg4, sc, (0, 1))
    assert res.converged and len(res.per_rhs) == 2
    assert res.iterations == sum(res.per_rhs)
    assert res.matvecs > 4 * res.iterations
