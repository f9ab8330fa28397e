"""Small complex dense kernels shared by the Krylov solvers.

Inner products follow the convention ``(x, y) = y^H x``.  Every function
that would need a global reduction on a distributed machine reports one
reduction phase to :mod:`coarsekit.instrument`, no matter how many inner
products it batches.
"""

from __future__ import annotations

import numpy as np

from . import instrument
from .errors import (DimensionMismatch, EigNotConverged, GeneralizedEigSingularB,
                     RankDeficient, SingularBlock)

EPS = np.finfo(float).eps


def _as_basis(basis) -> np.ndarray:
    if isinstance(basis, np.ndarray) and basis.ndim == 2:
        return basis
    cols = list(basis)
    if not cols:
        return np.zeros((0, 0), dtype=complex)
    return np.column_stack(cols)


def dot_batch(basis, w: np.ndarray) -> np.ndarray:
    """All inner products ``(w, v_i) = v_i^H w`` in one reduction phase."""
    V = _as_basis(basis)
    w = np.asarray(w)
    if V.shape[1] and V.shape[0] != w.shape[0]:
        raise DimensionMismatch(f"basis rows {V.shape[0]} != vector length {w.shape[0]}")
    instrument.add(reduction_phases=1, dot_products=V.shape[1])
    if V.shape[1] == 0:
        return np.zeros(0, dtype=complex)
    return V.conj().T @ w


def fused_dot_norm(basis, w: np.ndarray) -> tuple[np.ndarray, float]:
    """``basis^H w`` together with ``||w||^2`` in a single reduction phase."""
    V = _as_basis(basis)
    instrument.add(reduction_phases=1, dot_products=V.shape[1] + 1)
    coeffs = V.conj().T @ w if V.shape[1] else np.zeros(0, dtype=complex)
    return coeffs, float(np.vdot(w, w).real)


def norm(w: np.ndarray) -> float:
    instrument.add(reduction_phases=1, dot_products=1)
    return float(np.sqrt(np.vdot(w, w).real))


def gram(W: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """``W^H Z`` as one reduction phase."""
    instrument.add(reduction_phases=1, dot_products=W.shape[1] * Z.shape[1])
    return W.conj().T @ Z


def column_norms(W: np.ndarray) -> np.ndarray:
    instrument.add(reduction_phases=1, dot_products=W.shape[1])
    return np.linalg.norm(W, axis=0)


def lincomb(V: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """``V @ coeffs`` counted as one axpy per column."""
    instrument.add(axpys=V.shape[1])
    if V.shape[1] == 0:
        return np.zeros(V.shape[0], dtype=complex)
    return V @ coeffs


def orthogonalize(mode: str, basis, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gram-Schmidt ``w`` against an orthonormal basis.

    ``classical`` fuses all coefficients into one reduction phase;
    ``modified`` spends one phase per basis vector.
    """
    V = _as_basis(basis)
    if V.shape[1] and V.shape[0] != w.shape[0]:
        raise DimensionMismatch(f"basis rows {V.shape[0]} != vector length {w.shape[0]}")
    if mode == "classical":
        h = dot_batch(V, w)
        return h, w - lincomb(V, h)
    if mode == "modified":
        w = np.array(w, dtype=complex)
        h = np.zeros(V.shape[1], dtype=complex)
        for i in range(V.shape[1]):
            h[i] = dot_batch(V[:, i:i + 1], w)[0]
            w -= h[i] * V[:, i]
            instrument.add(axpys=1)
        return h, w
    raise ValueError(f"unknown orthogonalization mode {mode!r}")


def givens(x: complex, y: complex) -> tuple[float, complex, complex]:
    """``(c, s, r)`` with ``[[c, s], [-conj(s), c]] @ [x, y] = [r, 0]``."""
    ax, ay = abs(x), abs(y)
    if ay == 0.0:
        return 1.0, 0j, complex(x)
    if ax == 0.0:
        return 0.0, 1.0 + 0j, complex(y)
    rho = np.hypot(ax, ay)
    c = ax / rho
    s = (x / ax) * np.conj(y) / rho
    return c, s, (x / ax) * rho


class LeastSquaresState:
    """Incremental solution of ``min ||beta e_1 - Hbar z||`` via Givens rotations.

    Columns of the Hessenberg matrix are appended one at a time; the
    residual norm is available right after each append.
    """

    def __init__(self, beta: float):
        self.beta = float(beta)
        self.g = [complex(beta)]
        self.cs: list[tuple[float, complex]] = []
        self.R: list[np.ndarray] = []
        self.breakdown = False

    @property
    def size(self) -> int:
        return len(self.R)

    @property
    def residual(self) -> float:
        return abs(self.g[-1])

    def append(self, column) -> "LeastSquaresState":
        col = np.array(column, dtype=complex)
        j = self.size
        if col.shape[0] != j + 2:
            raise DimensionMismatch(f"column length {col.shape[0]} != {j + 2}")
        for i, (c, s) in enumerate(self.cs):
            a, b = col[i], col[i + 1]
            col[i] = c * a + s * b
            col[i + 1] = -np.conj(s) * a + c * b
        c, s, r = givens(col[j], col[j + 1])
        col[j], col[j + 1] = r, 0.0
        self.cs.append((c, s))
        self.R.append(col[: j + 1])
        gj = self.g[j]
        self.g[j] = c * gj
        self.g.append(-np.conj(s) * gj)
        if column[j + 1] == 0:
            self.breakdown = True
        return self

    def solve(self) -> np.ndarray:
        j = self.size
        y = np.zeros(j, dtype=complex)
        for i in range(j - 1, -1, -1):
            acc = self.g[i] - sum(self.R[c][i] * y[c] for c in range(i + 1, j))
            y[i] = acc / self.R[i][i]
        return y


def lsq_append(state: LeastSquaresState, column) -> LeastSquaresState:
    return state.append(column)


def hessenberg_reduce(A: np.ndarray, want_q: bool = False):
    """Householder reduction ``A = Q H Q^H`` with ``H`` upper Hessenberg."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    Q = np.eye(n, dtype=complex) if want_q else None
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        H[k + 1:, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, :])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
        H[k + 2:, k] = 0.0
        if want_q:
            Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v.conj())
    return H, Q


def _wilkinson_shift(a, b, c, d):
    # eigenvalue of [[a, b], [c, d]] closer to d
    tr = a + d
    det = a * d - b * c
    disc = np.sqrt(tr * tr / 4.0 - det)
    l1, l2 = tr / 2.0 + disc, tr / 2.0 - disc
    return l1 if abs(l1 - d) <= abs(l2 - d) else l2


def schur_qr(H: np.ndarray, Z: np.ndarray | None = None, full: bool = False,
             max_sweeps: int | None = None):
    """Single-shift complex QR iteration on a Hessenberg matrix.

    Returns the (quasi) triangular factor and, when ``Z`` is given, the
    accumulated unitary.  ``full=True`` keeps the whole Schur form up to
    date (needed for eigenvectors).
    """
    T = np.array(H, dtype=complex)
    n = T.shape[0]
    if max_sweeps is None:
        max_sweeps = 30 * max(n, 1)
    hi = n - 1
    sweeps = 0
    stalled = 0
    scale = max(np.abs(T).max(), np.finfo(float).tiny)
    while hi > 0:
        l = hi
        while l > 0:
            tol = EPS * (abs(T[l - 1, l - 1]) + abs(T[l, l]))
            if tol == 0.0:
                tol = EPS * scale
            if abs(T[l, l - 1]) <= tol:
                T[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            hi -= 1
            stalled = 0
            continue
        sweeps += 1
        stalled += 1
        if sweeps > max_sweeps:
            raise EigNotConverged(f"QR iteration exceeded {max_sweeps} sweeps (n={n})")
        if stalled % 11 == 10:
            sigma = T[hi, hi] + 0.75 * abs(T[hi, hi - 1])
        else:
            sigma = _wilkinson_shift(T[hi - 1, hi - 1], T[hi - 1, hi], T[hi, hi - 1], T[hi, hi])
        col_stop = n if full else hi + 1
        row_start = 0 if full else l
        x, y = T[l, l] - sigma, T[l + 1, l]
        for k in range(l, hi):
            c, s, _ = givens(x, y)
            G = np.array([[c, s], [-np.conj(s), c]])
            lo = max(l, k - 1)
            T[k:k + 2, lo:col_stop] = G @ T[k:k + 2, lo:col_stop]
            top = min(k + 3, hi + 1)
            T[row_start:top, k:k + 2] = T[row_start:top, k:k + 2] @ G.conj().T
            if Z is not None:
                Z[:, k:k + 2] = Z[:, k:k + 2] @ G.conj().T
            if k < hi - 1:
                x, y = T[k + 1, k], T[k + 2, k]
            if k > l:
                T[k + 1, k - 1] = 0.0
    return T, Z


def hessenberg_eig(H: np.ndarray, vectors: bool = False):
    """Eigenvalues (and optionally unit eigenvectors) of a square matrix.

    Non-Hessenberg input is reduced first.  Eigenvectors come from
    back-substitution on the Schur form.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    if H.shape != (n, n):
        raise DimensionMismatch(f"square matrix required, got {H.shape}")
    if n == 0:
        return (np.zeros(0, dtype=complex), np.zeros((0, 0), dtype=complex)) if vectors else np.zeros(0, dtype=complex)
    if not np.all(np.isfinite(H)):
        raise EigNotConverged("non-finite entries")
    Hh, Q = hessenberg_reduce(H, want_q=vectors)
    if not vectors:
        T, _ = schur_qr(Hh)
        return np.diag(T).copy()
    T, Z = schur_qr(Hh, Z=Q, full=True)
    theta = np.diag(T).copy()
    Y = np.zeros((n, n), dtype=complex)
    smallnum = EPS * max(np.abs(T).max(), np.finfo(float).tiny)
    for i in range(n):
        y = np.zeros(n, dtype=complex)
        y[i] = 1.0
        for r in range(i - 1, -1, -1):
            denom = T[r, r] - theta[i]
            if abs(denom) < smallnum:
                denom = smallnum
            y[r] = -(T[r, r + 1:i + 1] @ y[r + 1:i + 1]) / denom
        Y[:, i] = y
    P = Z @ Y
    P /= np.linalg.norm(P, axis=0, keepdims=True)
    return theta, P


def _condition(M: np.ndarray) -> np.ndarray:
    sv = np.linalg.svd(M, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(sv[..., -1] > 0, sv[..., 0] / sv[..., -1], np.inf)


def lu_invert_block(M: np.ndarray, max_cond: float = 1e14) -> np.ndarray:
    """Inverse of one square block or a stack of blocks (..., n, n)."""
    M = np.asarray(M, dtype=complex)
    cond = _condition(M)
    if not np.all(cond <= max_cond):
        raise SingularBlock(f"block condition estimate {np.max(cond):.3g} exceeds {max_cond:.0e}")
    return np.linalg.inv(M)


def qr_small(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    M = np.asarray(M, dtype=complex)
    Q, R = np.linalg.qr(M)
    d = np.abs(np.diag(R))
    ref = max(np.linalg.norm(M), np.finfo(float).tiny)
    if d.size and d.min() <= max(M.shape) * EPS * ref:
        raise RankDeficient(f"matrix is numerically rank deficient (min |R_ii| = {d.min():.3g})")
    return Q, R


def generalized_eig(A: np.ndarray, B: np.ndarray, vectors: bool = True, max_cond: float = 1e12):
    """Eigenpairs of ``A p = theta B p`` through the standard problem ``B^{-1} A``."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"incompatible shapes {A.shape}, {B.shape}")
    if not _condition(B) <= max_cond:
        raise GeneralizedEigSingularB(f"B condition estimate {float(_condition(B)):.3g} exceeds {max_cond:.0e}")
    Binv = np.linalg.inv(B)
    return hessenberg_eig(Binv @ A, vectors=vectors)


def harmonic_ritz(Hbar: np.ndarray, vectors: bool = False, max_cond: float = 1e14):
    """Harmonic Ritz pairs from an Arnoldi Hessenberg matrix ``Hbar`` ((j+1) x j).

    These are the eigenpairs of ``H_j + |h_{j+1,j}|^2 f e_j^T`` with
    ``f = H_j^{-H} e_j``.  A zero trailing entry (exact invariant subspace)
    reduces them to ordinary Ritz pairs.
    """
    from .errors import HarmonicRitzSingular

    j = Hbar.shape[1]
    H = np.array(Hbar[:j, :j], dtype=complex)
    h = abs(Hbar[j, j - 1]) if Hbar.shape[0] > j else 0.0
    if h != 0.0:
        if not _condition(H) <= max_cond:
            raise HarmonicRitzSingular(f"H_{j} is numerically singular")
        e = np.zeros(j, dtype=complex)
        e[-1] = 1.0
        f = np.linalg.solve(H.conj().T, e)
        H[:, -1] += h * h * f
    return hessenberg_eig(H, vectors=vectors)
