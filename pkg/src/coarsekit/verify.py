"""Invariant suite run by ``coarsekit verify``.

Each check returns ``(passed, detail)``.  Checks are small and seeded so the
whole suite runs in seconds.
"""

from __future__ import annotations

import numpy as np

from .dense import hessenberg_eig
from .dirac import DiracParams, OddEvenOperator, assemble_dense, dense_from_operator, gamma5_field, split_field
from .krylov import SolverConfig, gcrodr, gmres, pipelined_gcrodr, pipelined_gmres
from .lattice import GAMMA, generate_gauge
from .precond import build_block_jacobi, build_polynomial, leja_check, leja_order, preconditioned_operator

CHECKS = {}


def check(name):
    def deco(fn):
        CHECKS[name] = fn
        return fn
    return deco


@check("gamma")
def _gamma():
    g = GAMMA.gamma
    eye = np.eye(4)
    err = max(np.abs(g[m] @ g[n] + g[n] @ g[m] - 2 * (m == n) * eye).max() for m in range(4) for n in range(4))
    herm = max(np.abs(g[m] - g[m].conj().T).max() for m in range(4))
    prod = g[0] @ g[1] @ g[2] @ g[3]
    phase = GAMMA.gamma5[0, 0] / prod[0, 0]
    g5 = np.abs(GAMMA.gamma5 - phase * prod).max() + abs(abs(phase) - 1)
    ok = err == 0 and herm == 0 and g5 < 1e-15
    return ok, f"clifford {err:.1e}, hermitian {herm:.1e}, gamma5 {g5:.1e}"


@check("su3")
def _su3():
    cfg = generate_gauge((4, 4, 4, 4), 7, 0.3)
    u = cfg.links.reshape(-1, 3, 3)
    unit = np.abs(np.conj(np.swapaxes(u, 1, 2)) @ u - np.eye(3)).max()
    det = np.abs(np.linalg.det(u) - 1).max()
    return unit <= 1e-12 and det <= 1e-12, f"unitarity {unit:.1e}, det {det:.1e}"


@check("hermiticity")
def _hermiticity():
    cfg = generate_gauge((2, 2, 2, 2), 3, 0.4)
    worst = 0.0
    for csw, mu in ((0.0, 0.0), (1.0, 0.0), (1.0, 0.1)):
        D = assemble_dense(DiracParams(-0.2, csw, mu), cfg)
        Dm = assemble_dense(DiracParams(-0.2, csw, -mu), cfg) if mu else D
        worst = max(worst, np.abs(gamma5_field(gamma5_field(D).T).T - Dm.conj().T).max())
    return worst <= 1e-12, f"max |G5 D G5 - D^H| = {worst:.1e}"


@check("schur")
def _schur():
    cfg = generate_gauge((2, 2, 2, 4), 5, 0.4)
    params = DiracParams(-0.3, 1.0, 0.05)
    D = assemble_dense(params, cfg)
    geom = cfg.geometry
    idx = np.arange(D.shape[0])
    e, o = split_field(geom, idx)
    Dc = D[np.ix_(e, e)] - D[np.ix_(e, o)] @ np.linalg.solve(D[np.ix_(o, o)], D[np.ix_(o, e)])
    red = assemble_dense(params, cfg, "reduced")
    err = np.abs(Dc - red).max()
    return err <= 1e-12, f"max |D_c - Schur| = {err:.1e}"


@check("gmres")
def _gmres():
    rng = np.random.default_rng(1)
    n = 24
    A = np.eye(n) * 3 + rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    _, rep = gmres(lambda v: A @ v, b, cfg=SolverConfig(m=n, max_restarts=1, tol=1e-14))
    K = np.empty((n, n), dtype=complex)
    K[:, 0] = b
    for j in range(1, n):
        K[:, j] = A @ K[:, j - 1]
    worst = 0.0
    for j, res in enumerate(rep.residual_history[:12], start=1):
        Q, _ = np.linalg.qr(K[:, :j])
        y = np.linalg.lstsq(A @ Q, b, rcond=None)[0]
        oracle = np.linalg.norm(b - A @ Q @ y) / np.linalg.norm(b)
        worst = max(worst, abs(res - oracle) / oracle)
    return worst <= 1e-8, f"max relative deviation from dense least squares {worst:.1e}"


@check("polynomial")
def _polynomial():
    ordered = leja_order([1, 10, 5])
    ok = list(ordered) == [10, 1, 5] and leja_check(leja_order(np.random.default_rng(0).standard_normal(9)))
    rng = np.random.default_rng(2)
    n = 16
    A = np.diag(np.linspace(1, 3, n)) + 0.1 * rng.standard_normal((n, n))
    q = build_polynomial(lambda v: A @ v, n, n, seed=3)
    b = rng.standard_normal(n) + 0j
    err = np.linalg.norm(b - A @ q.apply(b)) / np.linalg.norm(b)
    return ok and err <= 1e-8, f"leja {ok}, full-degree residual {err:.1e}"


def _reduced_system(seed=11):
    cfg = generate_gauge((4, 4, 4, 4), seed, 0.3)
    oe = OddEvenOperator(DiracParams(-0.2, 1.0), cfg)
    b = np.random.default_rng(0).standard_normal(oe.half_length) + 0j
    return oe, b


def _history_gap(h1, h2):
    if len(h1) != len(h2):
        return np.inf
    a, b = np.asarray(h1), np.asarray(h2)
    return float(np.max(np.abs(a - b) / b))


@check("pipelined")
def _pipelined():
    oe, b = _reduced_system()
    cfg = SolverConfig(m=10, max_restarts=50, tol=1e-8)
    _, r1 = gmres(oe.apply_reduced, b, cfg=cfg)
    _, r2 = pipelined_gmres(oe.apply_reduced, b, cfg=cfg)
    cfg_k = SolverConfig(m=10, max_restarts=50, tol=1e-8, k=4)
    _, r3, _ = gcrodr(oe.apply_reduced, b, cfg=cfg_k)
    _, r4, _ = pipelined_gcrodr(oe.apply_reduced, b, cfg=cfg_k)
    g1 = _history_gap(r2.residual_history, r1.residual_history)
    g2 = _history_gap(r4.residual_history, r3.residual_history)
    return max(g1, g2) <= 1e-6, f"gmres gap {g1:.1e}, gcrodr gap {g2:.1e}"


@check("gcrodr")
def _gcrodr():
    oe, b = _reduced_system()
    bjp = build_block_jacobi(oe)
    op = preconditioned_operator(oe, bjp)
    worst = [0.0, 0.0]

    def cb(info):
        rec = info["recycle"]
        if rec is None:
            return
        AU = np.column_stack([op(rec.U[:, i]) for i in range(rec.k)])
        worst[0] = max(worst[0], np.linalg.norm(rec.C - AU) / np.linalg.norm(rec.C))
        worst[1] = max(worst[1], np.abs(rec.C.conj().T @ rec.C - np.eye(rec.k)).max())

    cfg = SolverConfig(m=20, max_restarts=50, tol=1e-8, k=5, u=3)
    _, _, rec = gcrodr(oe.apply_reduced, b, cfg=cfg, left_prec=bjp.apply, callback=cb)
    b2 = np.random.default_rng(9).standard_normal(oe.half_length) + 0j
    _, _, rec2 = gcrodr(oe.apply_reduced, b2, cfg=cfg, recycle=rec, left_prec=bjp.apply)
    frozen = rec.frozen and np.array_equal(rec.U, rec2.U)
    ok = worst[0] <= 1e-8 and worst[1] <= 1e-8 and frozen
    return ok, f"|C - AU| {worst[0]:.1e}, |C^H C - I| {worst[1]:.1e}, frozen reuse {frozen}"


@check("eig")
def _eig():
    rng = np.random.default_rng(4)
    H = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    w, P = hessenberg_eig(H, vectors=True)
    res = max(np.linalg.norm(H @ P[:, i] - w[i] * P[:, i]) for i in range(8)) / np.linalg.norm(H, 2)
    return res <= 1e-8, f"max eigenpair residual {res:.1e}"


def run(only=None):
    """Run the selected checks; returns a list of ``(name, passed, detail)``."""
    names = list(CHECKS) if not only else list(only)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        from .errors import UsageError
        raise UsageError(f"unknown check(s) {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    out = []
    for name in names:
        try:
            ok, detail = CHECKS[name]()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
