"""Arnoldi, restarted GMRES, GCRO-DR and their latency-1 pipelined variants.

All solvers work on a linear operator given as a callable on 1-D complex
arrays, with an optional left preconditioner ``L`` and right
preconditioner ``M``; the Krylov space is built for ``L A M``.  Solutions
are returned in the original variables, ``x = x0 + M (...)``.

Reduction-phase accounting (classical Gram-Schmidt, see
:func:`reduction_overhead` for the per-solve constants):

* ``gmres``: 2 phases per iteration (coefficients, then the norm).
* ``pipelined_gmres``: 1 phase per iteration (coefficients and the norm of
  the precomputed vector are fused).
* GCRO-DR variants: same per-iteration cost, deflation coefficients
  against ``C_k`` are merged into the Arnoldi batch.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Callable, Optional

import numpy as np

from . import instrument
from .dense import (LeastSquaresState, column_norms, dot_batch, fused_dot_norm, generalized_eig,
                    gram, harmonic_ritz, lincomb, norm, orthogonalize, qr_small)
from .errors import (CoarseKitError, NegativeNormBreakdown, RecycleUpdateFailed, UsageError,
                     ZeroVector)

log = logging.getLogger(__name__)

BREAKDOWN_TOL = 1e-14

Operator = Callable[[np.ndarray], np.ndarray]


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    """Coarsest-level defaults: restart 60, 20 cycles, relative tolerance 1e-1."""

    m: int = 60
    max_restarts: int = 20
    tol: float = 1e-1
    orth: str = "classical"
    pipelined: bool = False
    k: int = 0
    u: int = 10
    relative_to_initial: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise UsageError(f"restart length m must be >= 1, got {self.m}")
        if not 0 <= self.k < self.m:
            raise UsageError(f"recycle size k must satisfy 0 <= k < m, got k={self.k}, m={self.m}")
        if not self.tol > 0:
            raise UsageError(f"tol must be > 0, got {self.tol}")
        if self.max_restarts < 1:
            raise UsageError(f"max_restarts must be >= 1, got {self.max_restarts}")
        if self.orth not in ("classical", "modified"):
            raise UsageError(f"orth must be 'classical' or 'modified', got {self.orth!r}")
        if self.u < 0:
            raise UsageError(f"update limit u must be >= 0, got {self.u}")


@dataclasses.dataclass
class ArnoldiDecomposition:
    V: np.ndarray  # n x (j+1)
    H: np.ndarray  # (j+1) x j
    breakdown: bool = False

    @property
    def steps(self) -> int:
        return self.H.shape[1]


@dataclasses.dataclass
class RecycleSubspace:
    """Recycled pair with ``C = A_pre U`` and orthonormal ``C``.

    ``AC`` caches ``A_pre C`` for the pipelined solver; it is only valid for
    the operator it was computed with.
    """

    U: np.ndarray
    C: np.ndarray
    updates_done: int = 0
    frozen: bool = False
    AC: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return self.U.shape[1]

    def copy(self) -> "RecycleSubspace":
        # arrays are never mutated in place, sharing them is a value transfer
        return dataclasses.replace(self)


@dataclasses.dataclass
class SolveReport:
    solver: str
    converged: bool = False
    iterations: int = 0
    cycles: int = 0
    residual_history: list = dataclasses.field(default_factory=list)
    final_relative_residual: float = float("nan")
    counters: instrument.CounterScope | None = None
    recycle_updates: int = 0
    eig_updates: int = 0
    projections: int = 0
    explicit_checks: int = 0
    breakdown: Optional[str] = None
    warnings: list = dataclasses.field(default_factory=list)

    @property
    def restarts(self) -> int:
        return self.cycles


def reduction_overhead(report: SolveReport) -> int:
    """Reduction phases outside the per-iteration Arnoldi work.

    ``1`` for the norm of the (preconditioned) right-hand side, one residual
    norm per cycle plus the initial one, one phase per start-of-solve
    projection onto ``C_k``, two per GCRO-DR eigen-update (column norms of
    ``U_k`` and the ``W^H U`` Gram block), one per recycle-space construction
    or update (the ``C^H C`` Gram block that re-orthonormalizes ``C_k``), and
    one per explicit residual confirmation.
    """
    return (2 + report.cycles + report.projections + 2 * report.eig_updates
            + report.recycle_updates + report.explicit_checks)


def arnoldi(op: Operator, v_start: np.ndarray, m: int, mode: str = "classical") -> ArnoldiDecomposition:
    beta = norm(v_start)
    if beta == 0.0:
        raise ZeroVector("Arnoldi start vector is zero")
    n = v_start.shape[0]
    V = np.zeros((n, m + 1), dtype=complex)
    H = np.zeros((m + 1, m), dtype=complex)
    V[:, 0] = v_start / beta
    for j in range(m):
        w = op(V[:, j])
        h, w = orthogonalize(mode, V[:, :j + 1], w)
        hn = norm(w)
        H[:j + 1, j] = h
        H[j + 1, j] = hn
        if hn <= BREAKDOWN_TOL * np.sqrt(hn * hn + np.vdot(h, h).real):
            H[j + 1, j] = 0.0
            return ArnoldiDecomposition(V[:, :j + 2], H[:j + 2, :j + 1], breakdown=True)
        V[:, j + 1] = w / hn
    return ArnoldiDecomposition(V, H)


def _identity(v):
    return v


class _Problem:
    """Bookkeeping shared by all solvers: operator composition and residuals."""

    def __init__(self, op, b, x0, cfg, left, right, name):
        self.op = op
        self.L = left or _identity
        self.M = right or _identity
        self.b = np.asarray(b, dtype=complex)
        self.cfg = cfg
        n = self.b.shape[0]
        self.x = np.zeros(n, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
        if self.x.shape != self.b.shape:
            raise UsageError(f"x0 shape {self.x.shape} != b shape {self.b.shape}")
        self.report = SolveReport(solver=name)

    def apre(self, v):
        return self.L(self.op(self.M(v)))

    def residual(self, x):
        return self.L(self.b - self.op(x))

    def start(self):
        self.bnorm = norm(self.L(self.b))
        r = self.residual(self.x)
        return r

    def set_reference(self, beta):
        self.ref = beta if self.cfg.relative_to_initial else self.bnorm
        if self.ref == 0.0:
            self.ref = 1.0

    def correct(self, V, y):
        self.x = self.x + self.M(lincomb(V, y))

    def finish(self, beta, converged):
        self.report.converged = bool(converged)
        self.report.final_relative_residual = beta / self.ref
        return self.x, self.report


def _counted(fn):
    """Run a solver inside its own counter scope and attach the delta."""

    def wrapper(*args, **kwargs):
        instrument.scope_begin()
        try:
            out = fn(*args, **kwargs)
        except NegativeNormBreakdown as exc:
            scope = instrument.scope_end()
            if exc.report is not None:
                exc.report.counters = scope
            raise
        except BaseException:
            instrument.scope_end()
            raise
        out[1].counters = instrument.scope_end()
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__qualname__ = fn.__qualname__
    wrapper.__doc__ = fn.__doc__
    return wrapper


class _Cycle:
    """Result of one Arnoldi cycle: basis, Hessenberg and deflation block."""

    def __init__(self, V, H, B, lsq, breakdown):
        self.V, self.H, self.B, self.lsq, self.breakdown = V, H, B, lsq, breakdown

    @property
    def steps(self):
        return self.H.shape[1]


def _arnoldi_cycle(prob: _Problem, r, beta, steps, C=None, min_steps=0, history=True) -> _Cycle:
    """Standard (non-pipelined) cycle, orthogonalizing against ``C`` and ``V``."""
    cfg = prob.cfg
    n = r.shape[0]
    kc = 0 if C is None else C.shape[1]
    V = np.zeros((n, steps + 1), dtype=complex)
    H = np.zeros((steps + 1, steps), dtype=complex)
    B = np.zeros((kc, steps), dtype=complex)
    V[:, 0] = r / beta
    lsq = LeastSquaresState(beta)
    breakdown = False
    j = 0
    for j in range(steps):
        w = prob.apre(V[:, j])
        if cfg.orth == "classical":
            basis = V[:, :j + 1] if kc == 0 else np.hstack([C, V[:, :j + 1]])
            coeffs, w = orthogonalize("classical", basis, w)
            B[:, j], h = coeffs[:kc], coeffs[kc:]
        else:
            if kc:
                B[:, j], w = orthogonalize("modified", C, w)
            h, w = orthogonalize("modified", V[:, :j + 1], w)
        hn = norm(w)
        H[:j + 1, j] = h
        H[j + 1, j] = hn
        local = np.sqrt(hn * hn + np.vdot(h, h).real + np.vdot(B[:, j], B[:, j]).real)
        if hn <= BREAKDOWN_TOL * local:
            H[j + 1, j] = 0.0
            breakdown = True
        lsq.append(H[:j + 2, j])
        prob.report.iterations += 1
        if history:
            prob.report.residual_history.append(lsq.residual / prob.ref)
        if breakdown:
            break
        V[:, j + 1] = w / hn
        if lsq.residual <= cfg.tol * prob.ref and j + 1 >= min_steps:
            break
    s = j + 1
    return _Cycle(V[:, :s + 1], H[:s + 1, :s], B[:, :s], lsq, breakdown)


def _pipelined_cycle(prob: _Problem, r, beta, steps, C=None, AC=None, min_steps=0) -> _Cycle:
    """Latency-1 pipelined cycle with ``v^a_j = A_pre v_j`` and fused norms."""
    cfg = prob.cfg
    n = r.shape[0]
    kc = 0 if C is None else C.shape[1]
    V = np.zeros((n, steps + 1), dtype=complex)
    Va = np.zeros((n, steps + 1), dtype=complex)
    H = np.zeros((steps + 1, steps), dtype=complex)
    B = np.zeros((kc, steps), dtype=complex)
    V[:, 0] = r / beta
    Va[:, 0] = prob.apre(V[:, 0])
    lsq = LeastSquaresState(beta)
    breakdown = False
    i = 0
    for i in range(1, steps + 1):
        va = Va[:, i - 1]
        w = prob.apre(va)
        basis = V[:, :i] if kc == 0 else np.hstack([C, V[:, :i]])
        coeffs, nrm2 = fused_dot_norm(basis, va)
        b, h = coeffs[:kc], coeffs[kc:]
        t = nrm2 - np.vdot(h, h).real - np.vdot(b, b).real
        B[:, i - 1] = b
        H[:i, i - 1] = h
        if t < -BREAKDOWN_TOL * nrm2:
            H = H[:i, :i - 1]
            cyc = _Cycle(V[:, :i], H, B[:, :i - 1], lsq, False)
            raise NegativeNormBreakdown(
                f"t = {t:.3e} < 0 at iteration {prob.report.iterations + 1}", x=None, report=cyc)
        if t <= BREAKDOWN_TOL * nrm2:
            H[i, i - 1] = 0.0
            breakdown = True
            lsq.append(H[:i + 1, i - 1])
            prob.report.iterations += 1
            prob.report.residual_history.append(lsq.residual / prob.ref)
            break
        hn = np.sqrt(t)
        H[i, i - 1] = hn
        V[:, i] = (va - lincomb(V[:, :i], h) - (lincomb(C, b) if kc else 0.0)) / hn
        Va[:, i] = (w - lincomb(Va[:, :i], h) - (lincomb(AC, b) if kc else 0.0)) / hn
        lsq.append(H[:i + 1, i - 1])
        prob.report.iterations += 1
        prob.report.residual_history.append(lsq.residual / prob.ref)
        if lsq.residual <= cfg.tol * prob.ref and i >= min_steps:
            break
    s = i
    return _Cycle(V[:, :s + 1], H[:s + 1, :s], B[:, :s], lsq, breakdown)


def _run_cycle(prob, r, beta, steps, pipelined, C=None, AC=None, min_steps=0):
    if not pipelined:
        return _arnoldi_cycle(prob, r, beta, steps, C=C, min_steps=min_steps)
    try:
        return _pipelined_cycle(prob, r, beta, steps, C=C, AC=AC, min_steps=min_steps)
    except NegativeNormBreakdown as exc:
        cyc = exc.report
        if cyc.steps:
            y = cyc.lsq.solve()
            prob.correct(cyc.V[:, :cyc.steps], y)
        prob.report.breakdown = str(exc)
        rep = prob.report
        exc.x, exc.report = prob.x, rep
        raise


def _gmres_impl(op, b, x0, cfg, left_prec, right_prec, pipelined, name):
    prob = _Problem(op, b, x0, cfg, left_prec, right_prec, name)
    r = prob.start()
    if prob.bnorm == 0.0 and not np.any(prob.x):
        prob.set_reference(0.0)
        prob.report.converged = True
        prob.report.final_relative_residual = 0.0
        return prob.x, prob.report
    beta = norm(r)
    prob.set_reference(beta)
    converged = beta <= cfg.tol * prob.ref
    while not converged and prob.report.cycles < cfg.max_restarts:
        prob.report.cycles += 1
        cyc = _run_cycle(prob, r, beta, cfg.m, pipelined)
        y = cyc.lsq.solve()
        prob.correct(cyc.V[:, :cyc.steps], y)
        r = prob.residual(prob.x)
        beta = norm(r)
        converged = beta <= cfg.tol * prob.ref
    return prob.finish(beta, converged)


@_counted
def gmres(op: Operator, b, x0=None, cfg: SolverConfig = SolverConfig(), left_prec=None, right_prec=None):
    """Restarted GMRES(m); returns ``(x, SolveReport)``.

    Convergence is declared on the explicitly recomputed residual at the end
    of a cycle, relative to ``||L b||`` (or to the initial residual when
    ``cfg.relative_to_initial``).
    """
    return _gmres_impl(op, b, x0, cfg, left_prec, right_prec, False, "gmres")


@_counted
def pipelined_gmres(op: Operator, b, x0=None, cfg: SolverConfig = SolverConfig(), left_prec=None,
                    right_prec=None):
    """Latency-1 pipelined GMRES, mathematically equal to classical-GS ``gmres``.

    Raises :class:`NegativeNormBreakdown` (with ``x`` and ``report``) when the
    rearranged norm becomes negative.
    """
    if cfg.orth != "classical":
        raise UsageError("pipelined GMRES is defined for classical Gram-Schmidt only")
    return _gmres_impl(op, b, x0, cfg, left_prec, right_prec, True, "pipe-gmres")


# -- recycling ----------------------------------------------------------------


def _smallest(theta: np.ndarray, k: int) -> np.ndarray:
    return np.argsort(np.abs(theta), kind="stable")[:k]


def _orthonormalize(U: np.ndarray, C: np.ndarray):
    # Cholesky QR on C (one Gram reduction); U takes the same factor so C = A U holds
    try:
        L = np.linalg.cholesky(gram(C, C))
    except np.linalg.LinAlgError as exc:
        raise RecycleUpdateFailed(f"C_k lost full rank: {exc}") from exc
    Linv_h = np.linalg.inv(L).conj().T
    return U @ Linv_h, C @ Linv_h


def seed_recycle(cyc: _Cycle, k: int) -> RecycleSubspace:
    """First-cycle recycle space from harmonic Ritz vectors of ``Hbar``."""
    k = min(k, cyc.steps)
    try:
        theta, P = harmonic_ritz(cyc.H, vectors=True)
        P = P[:, _smallest(theta, k)]
        Q, R = qr_small(cyc.H @ P)
        C = cyc.V @ Q
        U = cyc.V[:, :cyc.steps] @ P @ np.linalg.inv(R)
    except CoarseKitError as exc:
        raise RecycleUpdateFailed(f"initial recycle construction failed: {exc}") from exc
    U, C = _orthonormalize(U, C)
    return RecycleSubspace(U=U, C=C, updates_done=1)


def update_recycle(rec: RecycleSubspace, cyc: _Cycle, k: int) -> RecycleSubspace:
    """GCRO-DR eigen-update from the augmented cycle ``A_pre Vhat = What G``.

    Solves ``G^H G p = theta G^H (What^H Vhat) p`` and keeps the ``k``
    smallest-modulus pairs.
    """
    j = cyc.steps
    kc = rec.k
    dnorm = column_norms(rec.U)
    Ut = rec.U / dnorm
    Vhat = np.hstack([Ut, cyc.V[:, :j]])
    What = np.hstack([rec.C, cyc.V])
    G = np.zeros((kc + j + 1, kc + j), dtype=complex)
    G[:kc, :kc] = np.diag(1.0 / dnorm)
    G[:kc, kc:] = cyc.B
    G[kc:, kc:] = cyc.H
    WU = gram(What, Ut)
    WV = np.zeros((kc + j + 1, kc + j), dtype=complex)
    WV[:, :kc] = WU
    WV[kc:kc + j, kc:] = np.eye(j)
    try:
        theta, P = generalized_eig(G.conj().T @ G, G.conj().T @ WV)
        P = P[:, _smallest(theta, k)]
        Q, R = qr_small(G @ P)
        C = What @ Q
        U = Vhat @ P @ np.linalg.inv(R)
    except CoarseKitError as exc:
        raise RecycleUpdateFailed(f"recycle update failed: {exc}") from exc
    U, C = _orthonormalize(U, C)
    return RecycleSubspace(U=U, C=C, updates_done=rec.updates_done + 1)


def _freeze(rec: RecycleSubspace, u: int) -> RecycleSubspace:
    if rec.updates_done >= u:
        rec.frozen = True
        rec.U.setflags(write=False)
        rec.C.setflags(write=False)
    return rec


def _gcrodr_impl(op, b, x0, cfg, recycle, left_prec, right_prec, pipelined, name, callback):
    prob = _Problem(op, b, x0, cfg, left_prec, right_prec, name)
    rep = prob.report
    k = cfg.k
    rec = recycle.copy() if recycle is not None else None
    if rec is not None and rec.k == 0:
        rec = None
    r = prob.start()
    if prob.bnorm == 0.0 and not np.any(prob.x):
        prob.set_reference(0.0)
        rep.converged, rep.final_relative_residual = True, 0.0
        return prob.x, rep, rec

    def project(r):
        # remove the C-component: x += M U C^H r, r -= C C^H r
        z = dot_batch(rec.C, r)
        prob.correct(rec.U, z)
        rep.projections += 1
        return r - lincomb(rec.C, z)

    if rec is not None:
        r = project(r)
    beta = norm(r)
    prob.set_reference(beta)
    converged = False
    while rep.cycles < cfg.max_restarts:
        if beta <= cfg.tol * prob.ref:
            # confirm on the explicit residual; the recurrence can drift
            r_true = prob.residual(prob.x)
            rep.explicit_checks += 1
            beta = norm(r_true)
            if beta <= cfg.tol * prob.ref:
                converged = True
                break
            r = project(r_true) if rec is not None else r_true
            beta = norm(r)
            rep.explicit_checks += 1
            continue
        rep.cycles += 1
        if rec is None:
            need_seed = k > 0 and cfg.u > 0
            cyc = _run_cycle(prob, r, beta, cfg.m, pipelined, min_steps=k if need_seed else 0)
            y = cyc.lsq.solve()
            prob.correct(cyc.V[:, :cyc.steps], y)
            r = lincomb(cyc.V, _lsq_residual(cyc, beta, y))
            if need_seed:
                try:
                    rec = _freeze(seed_recycle(cyc, k), cfg.u)
                    rep.recycle_updates += 1
                except RecycleUpdateFailed as exc:
                    rep.warnings.append(str(exc))
                    log.warning("%s", exc)
        else:
            if pipelined and rec.AC is None:
                rec.AC = np.column_stack([prob.apre(rec.C[:, i]) for i in range(rec.k)])
            cyc = _run_cycle(prob, r, beta, cfg.m - rec.k, pipelined, C=rec.C, AC=rec.AC)
            yv = cyc.lsq.solve()
            yu = -cyc.B @ yv
            prob.correct(np.hstack([rec.U, cyc.V[:, :cyc.steps]]), np.concatenate([yu, yv]))
            r = lincomb(cyc.V, _lsq_residual(cyc, beta, yv))
            if not rec.frozen:
                try:
                    new = update_recycle(rec, cyc, k)
                    rep.eig_updates += 1
                    rep.recycle_updates += 1
                    rec = _freeze(new, cfg.u)
                except RecycleUpdateFailed as exc:
                    rep.warnings.append(str(exc))
                    log.warning("%s", exc)
        beta = norm(r)
        if callback is not None:
            callback({"cycle": rep.cycles, "x": prob.x, "r": r, "recycle": rec, "apre": prob.apre})
    if not converged:
        r_true = prob.residual(prob.x)
        rep.explicit_checks += 1
        beta = norm(r_true)
        converged = beta <= cfg.tol * prob.ref
    x, rep = prob.finish(beta, converged)
    return x, rep, rec


def _lsq_residual(cyc: _Cycle, beta: float, y: np.ndarray) -> np.ndarray:
    # coefficients of the new residual in the basis V_{j+1}
    rhs = np.zeros(cyc.H.shape[0], dtype=complex)
    rhs[0] = beta
    return rhs - cyc.H @ y


@_counted
def gcrodr(op: Operator, b, x0=None, cfg: SolverConfig = SolverConfig(), recycle: RecycleSubspace | None = None,
           left_prec=None, right_prec=None, callback=None):
    """GCRO-DR(m, k); returns ``(x, SolveReport, RecycleSubspace)``.

    Without a recycle space the first cycle is a plain GMRES(m) cycle whose
    harmonic Ritz vectors seed ``(U_k, C_k)``.  Later cycles run ``m - k``
    Arnoldi steps deflated against ``C_k``.  The subspace is updated after
    every cycle until ``cfg.u`` updates have been made, then frozen.
    """
    return _gcrodr_impl(op, b, x0, cfg, recycle, left_prec, right_prec, False, "gcrodr", callback)


@_counted
def pipelined_gcrodr(op: Operator, b, x0=None, cfg: SolverConfig = SolverConfig(),
                     recycle: RecycleSubspace | None = None, left_prec=None, right_prec=None, callback=None):
    """Latency-1 pipelined GCRO-DR.

    Each iteration fuses the deflation coefficients ``C^H v^a``, the Arnoldi
    coefficients and ``||v^a||^2`` into one reduction.  ``A_pre C`` is
    recomputed whenever the recycle space changes and cached once frozen.
    """
    if cfg.orth != "classical":
        raise UsageError("pipelined GCRO-DR is defined for classical Gram-Schmidt only")
    return _gcrodr_impl(op, b, x0, cfg, recycle, left_prec, right_prec, True, "pipe-gcrodr", callback)
