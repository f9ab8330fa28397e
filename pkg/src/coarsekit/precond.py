"""Block-Jacobi (left) and GMRES-polynomial (right) preconditioners."""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from . import instrument
from .dense import harmonic_ritz, lu_invert_block
from .dirac import OddEvenOperator
from .errors import DimensionMismatch, EmptyInput, HarmonicRitzSingular, UsageError
from .krylov import arnoldi
from .lattice import SITE_DOF

ZERO_THETA_RTOL = 1e-14


@dataclasses.dataclass(frozen=True, eq=False)
class BlockJacobiPreconditioner:
    """Per-site inverses of the 12x12 diagonal blocks of ``D_ee``.

    Applying it touches each site's data only, so it needs no communication
    and is not counted as a reduction or an operator application.
    """

    inverses: np.ndarray  # (sites, 12, 12)

    @property
    def length(self) -> int:
        return self.inverses.shape[0] * SITE_DOF

    def apply(self, v: np.ndarray) -> np.ndarray:
        if v.shape[0] != self.length:
            raise DimensionMismatch(f"vector length {v.shape[0]} != {self.length}")
        cols = v.reshape(self.inverses.shape[0], SITE_DOF, -1)
        out = np.matmul(self.inverses, cols)
        return out.reshape(v.shape)

    __call__ = apply


def build_block_jacobi(source) -> BlockJacobiPreconditioner:
    """From an :class:`OddEvenOperator` or directly from a stack of blocks."""
    blocks = source.D_ee if isinstance(source, OddEvenOperator) else np.asarray(source)
    inv = lu_invert_block(blocks)
    inv.setflags(write=False)
    return BlockJacobiPreconditioner(inverses=inv)


def apply_block_jacobi(bjp: BlockJacobiPreconditioner, v: np.ndarray) -> np.ndarray:
    return bjp.apply(v)


def leja_order(values) -> np.ndarray:
    """Greedy Leja ordering.

    The first node has maximal modulus; each following node maximizes the
    product of distances to the nodes already chosen.  Ties go to the lowest
    original index.  Products are compared in log form to avoid overflow.
    """
    vals = np.asarray(values, dtype=complex).ravel()
    if vals.size == 0:
        raise EmptyInput("leja_order needs at least one value")
    remaining = list(range(vals.size))
    first = max(remaining, key=lambda i: (abs(vals[i]), -i))
    order = [first]
    remaining.remove(first)
    logprod = np.zeros(vals.size)
    while remaining:
        last = vals[order[-1]]
        with np.errstate(divide="ignore"):
            logprod += np.log(np.abs(vals - last))
        best = max(remaining, key=lambda i: (logprod[i], -i))
        order.append(best)
        remaining.remove(best)
    return vals[order]


def leja_check(ordered) -> bool:
    """True when every step attains the maximal distance product among the rest."""
    vals = np.asarray(ordered, dtype=complex)
    if vals.size == 0:
        return False
    if np.abs(vals[0]) < np.abs(vals).max():
        return False
    for k in range(1, vals.size):
        prods = [np.prod(np.abs(v - vals[:k])) for v in vals[k:]]
        if prods[0] < max(prods):
            return False
    return True


@dataclasses.dataclass(frozen=True, eq=False)
class PolynomialPreconditioner:
    """``q(A) = sum_i (1/theta_i) prod_{j<i} (I - A/theta_j)`` in Newton form.

    ``theta`` holds the Leja-ordered harmonic Ritz values; ``operator`` is
    the (possibly block-Jacobi preconditioned) operator ``A`` it was built
    against.
    """

    theta: np.ndarray
    operator: Callable[[np.ndarray], np.ndarray]
    breakdown: bool = False

    @property
    def degree(self) -> int:
        """Number of nodes ``d``; the polynomial itself has degree ``d - 1``."""
        return self.theta.size

    def apply(self, v: np.ndarray) -> np.ndarray:
        theta = self.theta
        y = v / theta[0]
        t = v
        for i in range(1, theta.size):
            t = t - self.operator(t) / theta[i - 1]
            y = y + t / theta[i]
        instrument.add(axpys=2 * (theta.size - 1))
        return y

    __call__ = apply

    def residual_polynomial(self, v: np.ndarray) -> np.ndarray:
        """``p_d(A) v = prod_i (I - A/theta_i) v``."""
        for th in self.theta:
            v = v - self.operator(v) / th
        return v


def build_polynomial(op, n: int, d: int, seed: int = 0, start: np.ndarray | None = None) -> PolynomialPreconditioner:
    """Run ``d`` Arnoldi steps from a seeded random vector and Leja-order the
    harmonic Ritz values.

    A happy breakdown after ``j < d`` steps yields ``j`` nodes, which make
    ``q`` exact on the invariant subspace found.
    """
    if d < 1:
        raise UsageError(f"polynomial degree parameter d must be >= 1, got {d}")
    if d > n:
        raise UsageError(f"d = {d} exceeds the system dimension {n}")
    if start is None:
        rng = np.random.default_rng(seed)
        start = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        start /= np.linalg.norm(start)
    dec = arnoldi(op, start, d)
    theta = harmonic_ritz(dec.H)
    big = np.abs(theta).max()
    if np.any(np.abs(theta) <= ZERO_THETA_RTOL * big) or big == 0.0:
        raise HarmonicRitzSingular("a harmonic Ritz value is numerically zero")
    theta = leja_order(theta)
    theta.setflags(write=False)
    return PolynomialPreconditioner(theta=theta, operator=op, breakdown=dec.breakdown)


def apply_polynomial(q: PolynomialPreconditioner, v: np.ndarray) -> np.ndarray:
    return q.apply(v)


def preconditioned_operator(oe: OddEvenOperator, bjp: BlockJacobiPreconditioner | None = None):
    """``B^{-1} D_c`` when block-Jacobi is enabled, ``D_c`` otherwise."""
    if bjp is None:
        return oe.apply_reduced

    def apply(v):
        return bjp.apply(oe.apply_reduced(v))

    return apply


def composed_apply(bjp, q: PolynomialPreconditioner | None, oe: OddEvenOperator, v: np.ndarray) -> np.ndarray:
    """``(B^{-1} D_c) q(B^{-1} D_c) v``: ``d`` reduced-operator applications."""
    op = preconditioned_operator(oe, bjp)
    return op(q.apply(v) if q is not None else v)
