"""Matrix-free Wilson, clover-improved Wilson and twisted-mass Dirac operators.

The operator is stored as a per-site 12x12 self-coupling block plus eight
12x12 hopping blocks per site (one per signed direction), so that a product
is a gather followed by a batched small-matrix multiply.  The odd-even
reduced operator ``D_ee - D_eo D_oo^{-1} D_oe`` is applied in factored form.
"""

from __future__ import annotations

import dataclasses
from functools import cached_property

import numpy as np

from . import instrument
from .errors import DimensionMismatch, SingularSelfCoupling, TooLargeForDense
from .lattice import GAMMA, SITE_DOF, GaugeConfiguration, LatticeGeometry

DENSE_CAP = 16384
SINGULAR_COND = 1e14


@dataclasses.dataclass(frozen=True)
class DiracParams:
    m0: float
    csw: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if self.csw < 0:
            raise ValueError(f"csw must be >= 0, got {self.csw}")


def _spin_color(spin: np.ndarray, color: np.ndarray) -> np.ndarray:
    """Batched Kronecker product ``spin (x) color`` -> (..., 12, 12)."""
    out = spin[..., :, None, :, None] * color[..., None, :, None, :]
    return out.reshape(out.shape[:-4] + (SITE_DOF, SITE_DOF))


def _dagger(u: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(u, -1, -2))


def clover_field(cfg: GaugeConfiguration) -> np.ndarray:
    """(volume, 4, 4, 3, 3) clover-leaf sums ``Q_{mu nu}(x)``.

    Only ``mu < nu`` are computed from plaquettes; ``Q_{nu mu} = Q_{mu nu}^H``
    and the diagonal entries are left at zero since they drop out of
    ``Q_{mu nu} - Q_{nu mu}``.
    """
    geom = cfg.geometry
    U = cfg.links
    fwd, bwd = geom.forward, geom.backward
    sites = np.arange(geom.volume)

    def step(x, mu, sign):
        return fwd[mu][x] if sign > 0 else bwd[mu][x]

    def link(x, mu, sign):
        # generalized link U_{+-mu}(x) for a hop from x to x +- mu
        if sign > 0:
            return U[x, mu]
        return _dagger(U[bwd[mu][x], mu])

    Q = np.zeros((geom.volume, 4, 4, 3, 3), dtype=complex)
    for mu in range(4):
        for nu in range(mu + 1, 4):
            acc = np.zeros((geom.volume, 3, 3), dtype=complex)
            for smu in (+1, -1):
                for snu in (+1, -1):
                    x_nu = step(sites, nu, snu)
                    x_mu = step(sites, mu, smu)
                    leaf = (link(sites, nu, snu) @ link(x_nu, mu, smu)
                            @ _dagger(link(x_mu, nu, snu)) @ _dagger(link(sites, mu, smu)))
                    acc += leaf
            Q[:, mu, nu] = acc
            Q[:, nu, mu] = _dagger(acc)
    return Q


def self_coupling_blocks(params: DiracParams, cfg: GaugeConfiguration) -> np.ndarray:
    """(volume, 12, 12) diagonal blocks: mass, clover and twisted-mass terms."""
    vol = cfg.geometry.volume
    blocks = np.broadcast_to((params.m0 + 4.0) * np.eye(SITE_DOF, dtype=complex),
                             (vol, SITE_DOF, SITE_DOF)).copy()
    if params.csw != 0.0:
        Q = clover_field(cfg)
        g = GAMMA.gamma
        clover = np.zeros_like(blocks)
        for mu in range(4):
            for nu in range(mu + 1, 4):
                F = Q[:, mu, nu] - Q[:, nu, mu]
                # the (mu, nu) and (nu, mu) terms of the full sum are equal
                clover += 2.0 * _spin_color(g[mu] @ g[nu], F)
        blocks -= (params.csw / 32.0) * clover
    if params.mu != 0.0:
        blocks += 1j * params.mu * np.kron(GAMMA.gamma5, np.eye(3))
    return blocks


def hopping_blocks(cfg: GaugeConfiguration) -> tuple[np.ndarray, np.ndarray]:
    """Hopping blocks and neighbor tables for all sites.

    Returns ``(K, nbr)`` with ``K`` of shape (volume, 8, 12, 12) and ``nbr``
    of shape (volume, 8); slot ``2*mu`` is the forward hop, ``2*mu + 1`` the
    backward hop, each already carrying the factor ``-1/2``.
    """
    geom = cfg.geometry
    U = cfg.links
    eye4 = np.eye(4, dtype=complex)
    K = np.empty((geom.volume, 8, SITE_DOF, SITE_DOF), dtype=complex)
    nbr = np.empty((geom.volume, 8), dtype=np.int64)
    for mu in range(4):
        g = GAMMA.gamma[mu]
        K[:, 2 * mu] = -0.5 * _spin_color(eye4 - g, U[:, mu])
        K[:, 2 * mu + 1] = -0.5 * _spin_color(eye4 + g, _dagger(U[geom.backward[mu], mu]))
        nbr[:, 2 * mu] = geom.forward[mu]
        nbr[:, 2 * mu + 1] = geom.backward[mu]
    return K, nbr


def _as_sites(psi: np.ndarray, nsites: int) -> tuple[np.ndarray, bool]:
    psi = np.asarray(psi)
    if psi.shape[0] != nsites * SITE_DOF:
        raise DimensionMismatch(f"field length {psi.shape[0]} != {nsites * SITE_DOF}")
    vec = psi.ndim == 1
    cols = psi.reshape(nsites, SITE_DOF, -1)
    return cols, vec


def _from_sites(out: np.ndarray, vec: bool) -> np.ndarray:
    out = out.reshape(-1, out.shape[-1])
    return out[:, 0] if vec else out


def _hop(K2: np.ndarray, nbr: np.ndarray, src: np.ndarray) -> np.ndarray:
    # K2: (targets, 12, 96); src: (sources, 12, c)
    gathered = src[nbr].reshape(nbr.shape[0], 8 * SITE_DOF, src.shape[-1])
    return np.matmul(K2, gathered)


def _block_apply(blocks: np.ndarray, src: np.ndarray) -> np.ndarray:
    return np.matmul(blocks, src)


class DiracOperator:
    """Full (unreduced) Dirac operator on a gauge configuration."""

    def __init__(self, params: DiracParams, cfg: GaugeConfiguration):
        self.params = params
        self.cfg = cfg
        self.geometry: LatticeGeometry = cfg.geometry
        self.diag = self_coupling_blocks(params, cfg)
        K, self.nbr = hopping_blocks(cfg)
        self.K = K
        self._K2 = np.ascontiguousarray(K.transpose(0, 2, 1, 3)).reshape(
            self.geometry.volume, SITE_DOF, 8 * SITE_DOF)

    @property
    def shape(self):
        n = self.geometry.field_length
        return (n, n)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        src, vec = _as_sites(psi, self.geometry.volume)
        instrument.add(fine_matvecs=src.shape[-1])
        out = _block_apply(self.diag, src) + _hop(self._K2, self.nbr, src)
        return _from_sites(out, vec)

    __call__ = apply


def apply_wilson(params: DiracParams, cfg: GaugeConfiguration, psi: np.ndarray) -> np.ndarray:
    """Clover-improved Wilson operator; ``params.mu`` must be zero."""
    if params.mu != 0.0:
        raise ValueError("apply_wilson takes mu = 0; use apply_twisted_mass")
    return DiracOperator(params, cfg).apply(psi)


def apply_twisted_mass(params: DiracParams, cfg: GaugeConfiguration, psi: np.ndarray) -> np.ndarray:
    return DiracOperator(params, cfg).apply(psi)


def gamma5_field(psi: np.ndarray) -> np.ndarray:
    """Multiply by ``Gamma_5 = I (x) gamma5 (x) I_3`` (spin-diagonal signs)."""
    sign = np.repeat(np.diag(GAMMA.gamma5).real, 3)
    nsites = psi.shape[0] // SITE_DOF
    shape = (nsites, SITE_DOF) + psi.shape[1:]
    return (psi.reshape(shape) * sign.reshape((1, SITE_DOF) + (1,) * (psi.ndim - 1))).reshape(psi.shape)


def split_field(geom: LatticeGeometry, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sites = psi.reshape(geom.volume, SITE_DOF, *psi.shape[1:])
    return (sites[geom.even_sites].reshape(-1, *psi.shape[1:]),
            sites[geom.odd_sites].reshape(-1, *psi.shape[1:]))


def join_field(geom: LatticeGeometry, psi_e: np.ndarray, psi_o: np.ndarray) -> np.ndarray:
    tail = psi_e.shape[1:]
    out = np.empty((geom.volume, SITE_DOF) + tail, dtype=np.result_type(psi_e, psi_o))
    out[geom.even_sites] = psi_e.reshape((-1, SITE_DOF) + tail)
    out[geom.odd_sites] = psi_o.reshape((-1, SITE_DOF) + tail)
    return out.reshape((-1,) + tail)


class OddEvenOperator:
    """Odd-even split of a Dirac operator with precomputed odd-site inverses."""

    def __init__(self, params: DiracParams, cfg: GaugeConfiguration, full: DiracOperator | None = None):
        full = full if full is not None else DiracOperator(params, cfg)
        geom = cfg.geometry
        self.params = params
        self.cfg = cfg
        self.geometry = geom
        self.full = full
        even, odd = geom.even_sites, geom.odd_sites
        hidx = geom.half_index

        self.D_ee = np.ascontiguousarray(full.diag[even])
        D_oo = full.diag[odd]
        sv = np.linalg.svd(D_oo, compute_uv=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(sv[:, -1] > 0, sv[:, 0] / sv[:, -1], np.inf)
        if not np.all(cond <= SINGULAR_COND):
            bad = int(np.argmax(~(cond <= SINGULAR_COND)))
            raise SingularSelfCoupling(
                f"odd-site self-coupling block {int(odd[bad])} has condition {cond[bad]:.3g}")
        self.D_oo = D_oo
        self.D_oo_inv = np.linalg.inv(D_oo)

        def hop_part(targets):
            K2 = full._K2[targets]
            return np.ascontiguousarray(K2), hidx[full.nbr[targets]]

        # nearest neighbors always have the opposite parity
        self._K2_eo, self._nbr_eo = hop_part(even)
        self._K2_oe, self._nbr_oe = hop_part(odd)

    @property
    def half_length(self) -> int:
        return self.geometry.half_volume * SITE_DOF

    @property
    def shape(self):
        return (self.half_length, self.half_length)

    def hop_eo(self, psi_o):
        """``D_eo psi_o`` (even targets)."""
        return _hop(self._K2_eo, self._nbr_eo, psi_o)

    def hop_oe(self, psi_e):
        return _hop(self._K2_oe, self._nbr_oe, psi_e)

    def apply_reduced(self, psi_e: np.ndarray) -> np.ndarray:
        src, vec = _as_sites(psi_e, self.geometry.half_volume)
        instrument.add(matvecs=src.shape[-1])
        tmp = _block_apply(self.D_oo_inv, self.hop_oe(src))
        out = _block_apply(self.D_ee, src) - self.hop_eo(tmp)
        return _from_sites(out, vec)

    __call__ = apply_reduced

    def reduced_rhs(self, eta: np.ndarray) -> np.ndarray:
        """``eta_e - D_eo D_oo^{-1} eta_o``."""
        eta_e, eta_o = split_field(self.geometry, eta)
        src_o, vec = _as_sites(eta_o, self.geometry.half_volume)
        out = _as_sites(eta_e, self.geometry.half_volume)[0] - self.hop_eo(_block_apply(self.D_oo_inv, src_o))
        return _from_sites(out, vec)

    def reconstruct_odd(self, eta: np.ndarray, psi_e: np.ndarray) -> np.ndarray:
        """Full solution with ``psi_o = D_oo^{-1} (eta_o - D_oe psi_e)``."""
        if psi_e.shape[0] != self.half_length:
            raise DimensionMismatch(f"psi_e length {psi_e.shape[0]} != {self.half_length}")
        _, eta_o = split_field(self.geometry, eta)
        src_e, vec = _as_sites(psi_e, self.geometry.half_volume)
        rhs_o = _as_sites(eta_o, self.geometry.half_volume)[0] - self.hop_oe(src_e)
        psi_o = _from_sites(_block_apply(self.D_oo_inv, rhs_o), vec)
        return join_field(self.geometry, psi_e, psi_o)

    def gamma5(self, psi_e):
        return gamma5_field(psi_e)


def split_odd_even(params: DiracParams, cfg: GaugeConfiguration) -> OddEvenOperator:
    return OddEvenOperator(params, cfg)


def apply_reduced(oe: OddEvenOperator, psi_e: np.ndarray) -> np.ndarray:
    return oe.apply_reduced(psi_e)


def reconstruct_odd(oe: OddEvenOperator, eta: np.ndarray, psi_e: np.ndarray) -> np.ndarray:
    return oe.reconstruct_odd(eta, psi_e)


def dense_from_operator(apply, n: int, cap: int = DENSE_CAP, chunk: int = 256) -> np.ndarray:
    """Column ``j`` is ``apply(e_j)``; columns are pushed through in batches."""
    if n > cap:
        raise TooLargeForDense(f"dimension {n} exceeds dense cap {cap}")
    out = np.empty((n, n), dtype=complex)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        basis = np.zeros((n, stop - start), dtype=complex)
        basis[np.arange(start, stop), np.arange(stop - start)] = 1.0
        out[:, start:stop] = apply(basis)
    return out


def assemble_dense(params: DiracParams, cfg: GaugeConfiguration, which: str = "full",
                   cap: int = DENSE_CAP) -> np.ndarray:
    geom = cfg.geometry
    n = geom.field_length if which == "full" else geom.half_volume * SITE_DOF
    if n > cap:
        raise TooLargeForDense(f"{which} dimension {n} exceeds dense cap {cap}")
    if which == "full":
        return dense_from_operator(DiracOperator(params, cfg).apply, n, cap)
    if which == "reduced":
        return dense_from_operator(OddEvenOperator(params, cfg).apply_reduced, n, cap)
    raise ValueError(f"which must be 'full' or 'reduced', got {which!r}")


def assemble_sparse(params: DiracParams, cfg: GaugeConfiguration):
    """Full operator as a ``scipy.sparse`` CSR matrix with the dense entries.

    Blocks hitting the same neighbor twice (extent-2 directions) are summed,
    as in the matrix-free application.
    """
    import scipy.sparse

    op = DiracOperator(params, cfg)
    V = cfg.geometry.volume
    r = np.arange(SITE_DOF)
    rows_site = np.concatenate([np.arange(V)[:, None], np.repeat(np.arange(V)[:, None], 8, axis=1)], axis=1)
    cols_site = np.concatenate([np.arange(V)[:, None], op.nbr], axis=1)
    blocks = np.concatenate([op.diag[:, None], op.K], axis=1)  # (V, 9, 12, 12)
    rows = (SITE_DOF * rows_site)[:, :, None, None] + r[None, None, :, None]
    cols = (SITE_DOF * cols_site)[:, :, None, None] + r[None, None, None, :]
    rows, cols = np.broadcast_arrays(rows, cols)
    n = cfg.geometry.field_length
    return scipy.sparse.coo_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def free_field_eigenvalues(geom: LatticeGeometry, m0: float) -> np.ndarray:
    """Analytic spectrum of the free Wilson operator, multiplicity included.

    Plane waves diagonalize the stencil: for each momentum the 12 modes split
    into 6 with ``+i|sin p|`` and 6 with ``-i|sin p|``.
    """
    p = geom.momenta()
    re = m0 + np.sum(1.0 - np.cos(p), axis=1)
    im = np.sqrt(np.sum(np.sin(p) ** 2, axis=1))
    vals = np.concatenate([re + 1j * im, re - 1j * im])
    return np.repeat(vals, 6)


def free_field_reduced_eigenvalues(geom: LatticeGeometry, m0: float) -> np.ndarray:
    """Analytic spectrum of the free odd-even reduced operator.

    The hopping part ``h(p) = -sum cos p + i sum gamma sin p`` flips sign under
    ``p -> p + (pi, pi, pi, pi)``; both momenta share one set of even-site
    modes with eigenvalue ``(m0 + 4) - lambda^2 / (m0 + 4)``.
    """
    p = geom.momenta()
    a = -np.sum(np.cos(p), axis=1)
    s = np.sqrt(np.sum(np.sin(p) ** 2, axis=1))
    diag = m0 + 4.0
    vals = np.concatenate([diag - (a + 1j * s) ** 2 / diag, diag - (a - 1j * s) ** 2 / diag])
    return np.repeat(vals, 3)
