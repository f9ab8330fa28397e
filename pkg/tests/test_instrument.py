import json

import numpy as np
import pytest

from coarsekit import instrument
from coarsekit.dense import dot_batch, norm
from coarsekit.errors import ScopeError
from coarsekit.krylov import SolverConfig, gmres


def test_scope_counts_reduced_matvecs(oe4):
    v = np.ones(oe4.half_length, dtype=complex)
    instrument.scope_begin()
    for _ in range(3):
        oe4.apply_reduced(v)
    delta = instrument.scope_end()
    assert delta.matvecs == 3 and delta.fine_matvecs == 0


def test_unbalanced_end():
    with pytest.raises(ScopeError):
        instrument.scope_end()


def test_nested_additivity():
    v = np.ones(5, dtype=complex)
    with instrument.counting() as outer:
        norm(v)
        with instrument.counting() as inner:
            dot_batch([v, v], v)
            norm(v)
        dot_batch([v], v)
    exclusive = outer.result - inner.result
    assert inner.result.reduction_phases == 2
    assert exclusive.reduction_phases == 2
    assert (inner.result + exclusive).counts() == outer.result.counts()


def test_one_classical_iteration_two_phases():
    A = np.diag(np.arange(1.0, 6.0)) + 0j
    b = np.ones(5, dtype=complex)
    with instrument.counting() as c1:
        gmres(lambda v: A @ v, b, cfg=SolverConfig(m=1, max_restarts=1, tol=1e-12))
    with instrument.counting() as c2:
        gmres(lambda v: A @ v, b, cfg=SolverConfig(m=2, max_restarts=1, tol=1e-12))
    assert (c2.result - c1.result).reduction_phases == 2


def _report(seed):
    A = np.diag(np.linspace(1, 2, 20)) + 0j
    b = np.random.default_rng(seed).standard_normal(20) + 0j
    _, rep = gmres(lambda v: A @ v, b, cfg=SolverConfig(m=10, tol=1e-8))
    return instrument.report_json(rep.counters, solver="gmres", converged=rep.converged,
                                  iterations=rep.iterations, restarts=rep.restarts,
                                  final_relative_residual=rep.final_relative_residual,
                                  residual_history=rep.residual_history, params={"m": np.int64(10)})


def test_report_schema_and_determinism():
    a, b = json.loads(_report(1)), json.loads(_report(1))
    assert list(a) == ["solver", "converged", "iterations", "restarts", "final_relative_residual",
                       "residual_history", "counters", "wall_time_seconds", "params"]
    assert a["converged"] is True
    assert set(a["counters"]) == set(instrument.COUNTER_KEYS)
    a.pop("wall_time_seconds")
    b.pop("wall_time_seconds")
    assert a == b
