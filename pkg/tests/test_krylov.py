import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarsekit import instrument
from coarsekit.dirac import DiracParams, OddEvenOperator
from coarsekit.errors import NegativeNormBreakdown, UsageError, ZeroVector
from coarsekit.krylov import (SolverConfig, arnoldi, gcrodr, gmres, pipelined_gcrodr, pipelined_gmres,
                              reduction_overhead)
from coarsekit.lattice import generate_gauge
from coarsekit.precond import build_block_jacobi, build_polynomial, preconditioned_operator

from conftest import crandn

seeds = st.integers(0, 2**32 - 1)


def _dense(A):
    return lambda v: A @ v


def _oracle_history(A, b, steps):
    """Minimal residual over span{b, Ab, ...} by dense least squares."""
    K = np.empty((b.size, steps), dtype=complex)
    K[:, 0] = b
    for j in range(1, steps):
        K[:, j] = A @ K[:, j - 1]
    out = []
    for j in range(1, steps + 1):
        Q, _ = np.linalg.qr(K[:, :j])
        y = np.linalg.lstsq(A @ Q, b, rcond=None)[0]
        out.append(np.linalg.norm(b - A @ Q @ y) / np.linalg.norm(b))
    return np.array(out)


def test_config_validation():
    for kw in ({"m": 0}, {"k": 5, "m": 5}, {"tol": 0.0}, {"orth": "qr"}, {"max_restarts": 0}):
        with pytest.raises(UsageError):
            SolverConfig(**kw)
    c = SolverConfig()
    assert (c.m, c.max_restarts, c.tol, c.u) == (60, 20, 1e-1, 10)


def test_arnoldi_identity_breakdown():
    dec = arnoldi(lambda v: v, np.ones(4, dtype=complex), 3)
    assert dec.breakdown and dec.steps == 1
    assert np.allclose(dec.H, [[1], [0]])


def test_arnoldi_zero_start():
    with pytest.raises(ZeroVector):
        arnoldi(lambda v: v, np.zeros(3, dtype=complex), 2)


@pytest.mark.parametrize("mode", ["classical", "modified"])
def test_arnoldi_relation(mode):
    A = np.diag(np.arange(1.0, 6.0)) + 0j
    v = crandn(np.random.default_rng(0), 5)
    with instrument.counting() as c:
        dec = arnoldi(_dense(A), v, 4, mode)
    V, H = dec.V, dec.H
    assert np.abs(V.conj().T @ V - np.eye(5)).max() <= 1e-10
    assert np.linalg.norm(A @ V[:, :4] - V @ H) <= 1e-10 * 5
    want = 2 * 4 if mode == "classical" else sum(j + 1 for j in range(1, 5))
    assert c.result.reduction_phases == want + 1  # plus the start-vector norm


def test_gmres_identity():
    b = crandn(np.random.default_rng(1), 7)
    x, rep = gmres(lambda v: v, b, cfg=SolverConfig(tol=1e-12))
    assert rep.converged and rep.iterations == 1
    assert np.allclose(x, b)


def test_gmres_zero_rhs():
    x, rep = gmres(lambda v: v, np.zeros(4, dtype=complex))
    assert rep.converged and not np.any(x)


@given(seeds, st.integers(4, 40))
def test_gmres_optimality_oracle(seed, n):
    rng = np.random.default_rng(seed)
    A = np.eye(n) * 2 + crandn(rng, n, n) / np.sqrt(n)
    b = crandn(rng, n)
    _, rep = gmres(_dense(A), b, cfg=SolverConfig(m=n, max_restarts=1, tol=1e-13))
    h = np.array(rep.residual_history)
    steps = min(len(h), 12)
    oracle = _oracle_history(A, b, steps)
    assert np.all(np.abs(h[:steps] - oracle) <= 1e-10 + 1e-8 * oracle)
    assert np.all(np.diff(h) <= 1e-14)


@pytest.mark.parametrize("orth", ["classical", "modified"])
def test_gmres_restarted_converges(orth):
    rng = np.random.default_rng(4)
    n = 60
    A = np.diag(np.linspace(0.5, 4, n)) + 0.1 * crandn(rng, n, n)
    b = crandn(rng, n)
    x, rep = gmres(_dense(A), b, cfg=SolverConfig(m=8, max_restarts=100, tol=1e-10, orth=orth))
    assert rep.converged and rep.cycles > 1
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)


def test_gmres_reports_best_iterate_when_not_converged():
    A = np.diag(np.linspace(0.01, 4, 80)) + 0j
    b = np.ones(80, dtype=complex)
    x, rep = gmres(_dense(A), b, cfg=SolverConfig(m=3, max_restarts=2, tol=1e-12))
    assert not rep.converged and rep.cycles == 2
    assert rep.final_relative_residual == pytest.approx(np.linalg.norm(b - A @ x) / np.linalg.norm(b))


def test_reduction_phase_accounting(oe4):
    b = crandn(np.random.default_rng(0), oe4.half_length)
    cfg = SolverConfig(m=10, max_restarts=40, tol=1e-8)
    _, r1 = gmres(oe4.apply_reduced, b, cfg=cfg)
    _, r2 = pipelined_gmres(oe4.apply_reduced, b, cfg=cfg)
    assert r1.counters.reduction_phases == 2 * r1.iterations + reduction_overhead(r1)
    assert r2.counters.reduction_phases == r2.iterations + reduction_overhead(r2)
    assert reduction_overhead(r1) == r1.cycles + 2
    assert reduction_overhead(r2) == r2.cycles + 2
    # one reduced-operator application per iteration, plus one per residual check
    assert r1.counters.matvecs == r1.iterations + r1.cycles + 1


def test_right_preconditioned_solution_in_original_variables(oe4):
    n = oe4.half_length
    bjp = build_block_jacobi(oe4)
    q = build_polynomial(preconditioned_operator(oe4, bjp), n, 4, seed=0)
    b = crandn(np.random.default_rng(2), n)
    x, rep = gmres(oe4.apply_reduced, b, cfg=SolverConfig(m=30, max_restarts=50, tol=1e-9),
                   left_prec=bjp.apply, right_prec=q.apply)
    assert rep.converged
    true = np.linalg.norm(bjp.apply(b - oe4.apply_reduced(x))) / np.linalg.norm(bjp.apply(b))
    assert true == pytest.approx(rep.final_relative_residual, rel=1e-6)
    assert true <= 1e-9
    # d per iteration, d - 1 per cycle for x = x0 + q(A) V y, plus residual checks
    assert rep.counters.matvecs == 4 * rep.iterations + 3 * rep.cycles + rep.cycles + 1


def test_free_field_end_to_end():
    cfg = generate_gauge((4, 4, 4, 4), 0, 0.0)
    oe = OddEvenOperator(DiracParams(-0.5), cfg)
    eta = crandn(np.random.default_rng(0), cfg.geometry.field_length)
    x, rep = gmres(oe.apply_reduced, oe.reduced_rhs(eta), cfg=SolverConfig(m=60, tol=1e-10))
    assert rep.converged
    psi = oe.reconstruct_odd(eta, x)
    assert np.linalg.norm(eta - oe.full.apply(psi)) / np.linalg.norm(eta) <= 1e-9


def test_pipelined_eigenvector_rhs():
    A = np.diag([2.0, 3.0]) + 0j
    x, rep = pipelined_gmres(_dense(A), np.array([1, 0], dtype=complex), cfg=SolverConfig(tol=1e-12))
    assert rep.converged and rep.iterations == 1
    assert np.allclose(x, [0.5, 0])


def test_pipelined_matches_standard(oe4):
    b = crandn(np.random.default_rng(3), oe4.half_length)
    cfg = SolverConfig(m=10, max_restarts=40, tol=1e-8)
    _, r1 = gmres(oe4.apply_reduced, b, cfg=cfg)
    _, r2 = pipelined_gmres(oe4.apply_reduced, b, cfg=cfg)
    h1, h2 = np.array(r1.residual_history), np.array(r2.residual_history)
    assert h1.shape == h2.shape
    assert np.max(np.abs(h1 - h2) / h1) <= 1e-6


def test_pipelined_negative_norm_breakdown():
    # near-invariant Krylov space: the t rearrangement cancels catastrophically
    cfg = generate_gauge((4, 4, 4, 4), 0, 0.0)
    oe = OddEvenOperator(DiracParams(-0.5), cfg)
    b = oe.reduced_rhs(crandn(np.random.default_rng(0), cfg.geometry.field_length))
    with pytest.raises(NegativeNormBreakdown) as info:
        pipelined_gmres(oe.apply_reduced, b, cfg=SolverConfig(m=60, tol=1e-10))
    exc = info.value
    assert exc.x is not None and exc.report is not None
    assert exc.report.counters is not None
    assert exc.report.breakdown


def test_pipelined_rejects_modified():
    with pytest.raises(UsageError):
        pipelined_gmres(lambda v: v, np.ones(3, dtype=complex), cfg=SolverConfig(orth="modified"))


def _constraint_errors(op, rec):
    AU = np.column_stack([op(rec.U[:, i]) for i in range(rec.k)])
    return (np.linalg.norm(rec.C - AU) / np.linalg.norm(AU),
            np.abs(rec.C.conj().T @ rec.C - np.eye(rec.k)).max())


@pytest.mark.parametrize("solver", [gcrodr, pipelined_gcrodr])
def test_gcrodr_constraints_each_update(oe4, solver):
    bjp = build_block_jacobi(oe4)
    op = preconditioned_operator(oe4, bjp)
    b = crandn(np.random.default_rng(0), oe4.half_length)
    floor = 1e-13 * np.linalg.norm(bjp.apply(b))  # rounding floor once r << b
    seen = []

    def cb(info):
        rec = info["recycle"]
        if rec is not None:
            seen.append(_constraint_errors(op, rec))
            r = info["r"]
            assert np.linalg.norm(rec.C.conj().T @ r) <= 1e-8 * np.linalg.norm(r) + floor

    x, rep, rec = solver(oe4.apply_reduced, b, cfg=SolverConfig(m=12, max_restarts=60, tol=1e-8, k=4),
                         left_prec=bjp.apply, callback=cb)
    assert rep.converged and seen
    assert max(s[0] for s in seen) <= 1e-8
    assert max(s[1] for s in seen) <= 1e-8
    assert rep.recycle_updates == min(rep.cycles, 10)
    assert rec.frozen == (rec.updates_done >= 10)


def test_gcrodr_first_cycle_is_gmres(oe4):
    b = crandn(np.random.default_rng(5), oe4.half_length)
    cfg = SolverConfig(m=15, max_restarts=1, tol=1e-12)
    _, r1 = gmres(oe4.apply_reduced, b, cfg=cfg)
    _, r2, _ = gcrodr(oe4.apply_reduced, b, cfg=SolverConfig(m=15, max_restarts=1, tol=1e-12, k=5))
    assert r1.residual_history == r2.residual_history


def test_gcrodr_recycles_small_eigenvector():
    n = 40
    d = np.concatenate([[0.01], np.linspace(1, 2, n - 1)])
    A = np.diag(d) + 0j
    b = np.ones(n, dtype=complex)
    _, _, rec = gcrodr(_dense(A), b, cfg=SolverConfig(m=10, max_restarts=2, tol=1e-14, k=1))
    u = rec.U[:, 0] / np.linalg.norm(rec.U[:, 0])
    angle = np.arccos(min(1.0, abs(u[0])))
    assert angle <= 1e-3


def test_gcrodr_frozen_reuse_is_bitwise(oe4):
    rng = np.random.default_rng(7)
    cfg = SolverConfig(m=12, max_restarts=60, tol=1e-8, k=4, u=2)
    _, _, rec = gcrodr(oe4.apply_reduced, crandn(rng, oe4.half_length), cfg=cfg)
    assert rec.frozen
    U0 = rec.U.copy()
    for _ in range(2):
        _, _, rec2 = gcrodr(oe4.apply_reduced, crandn(rng, oe4.half_length), cfg=cfg, recycle=rec)
        assert rec2.U.tobytes() == U0.tobytes()
        assert rec2.C.tobytes() == rec.C.tobytes()


def test_gcrodr_second_solve_faster():
    cfg4 = generate_gauge((4, 4, 4, 4), 3, 0.3)
    oe = OddEvenOperator(DiracParams(-0.36, 1.0), cfg4)
    rng = np.random.default_rng(0)
    cfg = SolverConfig(m=40, max_restarts=200, tol=1e-8, k=8)
    _, r1, rec = gcrodr(oe.apply_reduced, crandn(rng, oe.half_length), cfg=cfg)
    _, r2, _ = gcrodr(oe.apply_reduced, crandn(rng, oe.half_length), cfg=cfg, recycle=rec)
    assert r1.converged and r2.converged
    assert r2.iterations < r1.iterations


@pytest.mark.parametrize("solver", [gcrodr, pipelined_gcrodr])
def test_recycle_stays_orthonormal_across_rhs(solver):
    # short early-converging cycles used to let C_k drift from orthonormality
    # until a later right-hand side stagnated
    oe = OddEvenOperator(DiracParams(-0.0877, 1.0), generate_gauge((4, 4, 4, 4), 3, 0.3))
    bjp = build_block_jacobi(oe)
    cfg = SolverConfig(m=60 if solver is gcrodr else 10, max_restarts=200, tol=1e-8, k=8)
    rec = None
    for s in range(4):
        b = crandn(np.random.default_rng(s), oe.half_length)
        _, rep, rec = solver(oe.apply_reduced, b, cfg=cfg, recycle=rec, left_prec=bjp.apply)
        assert rep.converged
        assert np.linalg.norm(rec.C.conj().T @ rec.C - np.eye(rec.k)) <= 1e-12
        assert rep.counters.reduction_phases == (1 if solver is pipelined_gcrodr else 2) * rep.iterations \
            + reduction_overhead(rep)


def test_pipelined_gcrodr_matches(oe4):
    b = crandn(np.random.default_rng(8), oe4.half_length)
    cfg = SolverConfig(m=10, max_restarts=60, tol=1e-8, k=4)
    _, r1, _ = gcrodr(oe4.apply_reduced, b, cfg=cfg)
    _, r2, _ = pipelined_gcrodr(oe4.apply_reduced, b, cfg=cfg)
    h1, h2 = np.array(r1.residual_history), np.array(r2.residual_history)
    assert h1.shape == h2.shape
    assert np.max(np.abs(h1 - h2) / h1) <= 1e-6
    assert r2.counters.reduction_phases == r2.iterations + reduction_overhead(r2)
    assert r1.counters.reduction_phases == 2 * r1.iterations + reduction_overhead(r1)


def test_gcrodr_k_zero_is_gmres(oe4):
    b = crandn(np.random.default_rng(9), oe4.half_length)
    cfg = SolverConfig(m=20, max_restarts=20, tol=1e-6)
    _, r1 = gmres(oe4.apply_reduced, b, cfg=cfg)
    _, r2, rec = gcrodr(oe4.apply_reduced, b, cfg=cfg)
    assert rec is None
    # same iterates; restarts use the explicit vs. recurrence residual
    assert np.allclose(r1.residual_history, r2.residual_history, rtol=1e-10, atol=0)
