"""Periodic 4D lattice geometry, gamma matrices and SU(3) gauge fields.

Sites are indexed lexicographically over ``(t, x, y, z)`` with ``z`` fastest,
i.e. numpy C order on an array of shape ``dims``.  Direction ``mu = 0`` is
the time axis.  A fermion field stores 12 complex numbers per site with the
spin index major and the color index minor (``12 * site + 3 * spin + color``).
"""

from __future__ import annotations

import dataclasses
import hashlib
import struct
from functools import cached_property

import numpy as np

from .errors import GaugeFormatError, InvalidGeometry

NSPIN = 4
NCOLOR = 3
SITE_DOF = NSPIN * NCOLOR
MAGIC = b"LQGC"
FORMAT_VERSION = 1


@dataclasses.dataclass(frozen=True)
class LatticeGeometry:
    dims: tuple[int, int, int, int]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 4:
            raise InvalidGeometry(f"need four dimensions, got {len(dims)}")
        for d in dims:
            if d < 2 or d % 2:
                raise InvalidGeometry(f"every dimension must be even and >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def volume(self) -> int:
        return int(np.prod(self.dims))

    @property
    def half_volume(self) -> int:
        return self.volume // 2

    @property
    def field_length(self) -> int:
        return SITE_DOF * self.volume

    @cached_property
    def coords(self) -> np.ndarray:
        """(volume, 4) integer coordinates of every site."""
        grids = np.indices(self.dims).reshape(4, -1)
        return np.ascontiguousarray(grids.T)

    @cached_property
    def parity(self) -> np.ndarray:
        return self.coords.sum(axis=1) % 2

    @cached_property
    def even_sites(self) -> np.ndarray:
        return np.flatnonzero(self.parity == 0)

    @cached_property
    def odd_sites(self) -> np.ndarray:
        return np.flatnonzero(self.parity == 1)

    @cached_property
    def half_index(self) -> np.ndarray:
        """Position of each site inside its own parity sublattice."""
        pos = np.empty(self.volume, dtype=np.int64)
        pos[self.even_sites] = np.arange(self.half_volume)
        pos[self.odd_sites] = np.arange(self.half_volume)
        return pos

    def site_index(self, coord) -> int:
        return int(np.ravel_multi_index(tuple(int(c) % n for c, n in zip(coord, self.dims)), self.dims))

    def neighbor(self, site, mu: int, sign: int = +1):
        """Periodic neighbor ``site +/- mu_hat``; works on integer arrays."""
        c = self.coords[site].copy()
        c[..., mu] = (c[..., mu] + sign) % self.dims[mu]
        return np.ravel_multi_index(tuple(np.moveaxis(c, -1, 0)), self.dims)

    @cached_property
    def forward(self) -> np.ndarray:
        """(4, volume) table of ``site + mu_hat``."""
        all_sites = np.arange(self.volume)
        return np.stack([self.neighbor(all_sites, mu, +1) for mu in range(4)])

    @cached_property
    def backward(self) -> np.ndarray:
        all_sites = np.arange(self.volume)
        return np.stack([self.neighbor(all_sites, mu, -1) for mu in range(4)])

    def momenta(self) -> np.ndarray:
        """(volume, 4) lattice momenta ``2 pi k_mu / N_mu``."""
        return 2.0 * np.pi * self.coords / np.asarray(self.dims, dtype=float)


@dataclasses.dataclass(frozen=True)
class GammaBasis:
    gamma: np.ndarray  # (4, 4, 4)
    gamma5: np.ndarray


def build_gamma_basis() -> GammaBasis:
    """Chiral Euclidean basis with ``gamma5 = diag(1, 1, -1, -1)``.

    ``gamma[0]`` is the time direction.  The phase relating ``gamma5`` to
    the product of the four gammas is fixed by requiring the diagonal form.
    """
    sigma = [
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
    zero = np.zeros((2, 2), dtype=complex)
    eye = np.eye(2, dtype=complex)
    g = np.empty((4, 4, 4), dtype=complex)
    g[0] = np.block([[zero, eye], [eye, zero]])
    for k, s in enumerate(sigma, start=1):
        g[k] = np.block([[zero, -1j * s], [1j * s, zero]])
    g5 = np.diag([1, 1, -1, -1]).astype(complex)
    g.setflags(write=False)
    g5.setflags(write=False)
    return GammaBasis(gamma=g, gamma5=g5)


GAMMA = build_gamma_basis()


@dataclasses.dataclass(frozen=True, eq=False)
class GaugeConfiguration:
    geometry: LatticeGeometry
    links: np.ndarray  # (volume, 4, 3, 3), links[x, mu] = U_mu(x)
    seed: int
    disorder: float

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.links).tobytes()).hexdigest()


def _random_traceless_hermitian(rng: np.random.Generator, count: int) -> np.ndarray:
    a = rng.standard_normal((count, 3, 3)) + 1j * rng.standard_normal((count, 3, 3))
    h = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    tr = np.trace(h, axis1=-2, axis2=-1).real / 3.0
    h -= tr[:, None, None] * np.eye(3)
    return h


def generate_gauge(dims, seed: int, disorder: float) -> GaugeConfiguration:
    """Links ``exp(i * disorder * H)`` with seeded traceless Hermitian ``H``.

    ``disorder = 0`` gives the free field (all links exactly the identity).
    """
    geom = LatticeGeometry(tuple(dims))
    if not disorder >= 0:
        raise InvalidGeometry(f"disorder must be >= 0, got {disorder}")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    n = geom.volume * 4
    if disorder == 0:
        links = np.broadcast_to(np.eye(3, dtype=complex), (n, 3, 3)).copy()
    else:
        rng = np.random.default_rng(seed)
        h = _random_traceless_hermitian(rng, n)
        w, v = np.linalg.eigh(h)
        # exact zero eigenvalue sum keeps det(U) = 1 up to rounding
        w = w - w.mean(axis=1, keepdims=True)
        phases = np.exp(1j * disorder * w)
        links = np.einsum("nij,nj,nkj->nik", v, phases, np.conj(v))
        links = _reunitarize(links)
    links = links.reshape(geom.volume, 4, 3, 3)
    links.setflags(write=False)
    return GaugeConfiguration(geometry=geom, links=links, seed=seed, disorder=float(disorder))


def _reunitarize(u: np.ndarray) -> np.ndarray:
    # Gram-Schmidt on the first two rows, third row from the cross product.
    r0 = u[:, 0, :]
    r0 = r0 / np.linalg.norm(r0, axis=1, keepdims=True)
    r1 = u[:, 1, :] - np.sum(np.conj(r0) * u[:, 1, :], axis=1, keepdims=True) * r0
    r1 = r1 / np.linalg.norm(r1, axis=1, keepdims=True)
    r2 = np.conj(np.cross(r0, r1))
    return np.stack([r0, r1, r2], axis=1)


def write_gauge(cfg: GaugeConfiguration, path) -> None:
    dims = cfg.geometry.dims
    header = MAGIC + struct.pack("<I4IQd", FORMAT_VERSION, *dims, cfg.seed, cfg.disorder)
    body = np.ascontiguousarray(cfg.links, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


HEADER_SIZE = 4 + struct.calcsize("<I4IQd")


def read_gauge(path) -> GaugeConfiguration:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise GaugeFormatError(f"{path}: bad magic {raw[:4]!r}")
    version, *rest = struct.unpack("<I4IQd", raw[4:HEADER_SIZE])
    if version != FORMAT_VERSION:
        raise GaugeFormatError(f"{path}: unsupported version {version}")
    dims, seed, disorder = tuple(rest[:4]), rest[4], rest[5]
    geom = LatticeGeometry(dims)
    expected = HEADER_SIZE + geom.volume * 4 * 9 * 16
    if len(raw) != expected:
        raise GaugeFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    links = np.frombuffer(raw, dtype="<c16", offset=HEADER_SIZE).astype(complex)
    links = links.reshape(geom.volume, 4, 3, 3)
    links.setflags(write=False)
    return GaugeConfiguration(geometry=geom, links=links, seed=seed, disorder=disorder)
