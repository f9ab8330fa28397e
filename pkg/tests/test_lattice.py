import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarsekit.errors import GaugeFormatError, InvalidGeometry
from coarsekit.lattice import (GAMMA, HEADER_SIZE, LatticeGeometry, build_gamma_basis, generate_gauge,
                               read_gauge, write_gauge)

even_dim = st.sampled_from([2, 4, 6])


def test_clifford_algebra():
    g = build_gamma_basis().gamma
    for m in range(4):
        for n in range(4):
            expect = 2 * np.eye(4) * (m == n)
            assert np.array_equal(g[m] @ g[n] + g[n] @ g[m], expect)


def test_gammas_hermitian_unitary():
    for gm in GAMMA.gamma:
        assert np.array_equal(gm, gm.conj().T)
        assert np.allclose(gm @ gm.conj().T, np.eye(4), atol=0)


def test_gamma5_diagonal_and_phase():
    g = GAMMA.gamma
    assert np.array_equal(GAMMA.gamma5, np.diag([1, 1, -1, -1]))
    prod = g[0] @ g[1] @ g[2] @ g[3]
    phase = GAMMA.gamma5[0, 0] / prod[0, 0]
    assert abs(abs(phase) - 1) < 1e-15
    assert np.allclose(phase * prod, GAMMA.gamma5, atol=1e-15)


@pytest.mark.parametrize("dims", [(3, 4, 4, 4), (4, 4, 4, 0), (4, 4, 4)])
def test_bad_geometry(dims):
    with pytest.raises(InvalidGeometry):
        LatticeGeometry(dims)


@given(st.tuples(even_dim, even_dim, even_dim, even_dim), st.integers(0, 4), st.integers(0, 3))
def test_neighbors_wrap_and_flip_parity(dims, site_frac, mu):
    geom = LatticeGeometry(dims)
    site = site_frac * (geom.volume - 1) // 4
    fwd = geom.forward[mu, site]
    assert geom.backward[mu, fwd] == site
    assert geom.parity[fwd] != geom.parity[site]
    # going once around the lattice returns to the start
    s = site
    for _ in range(dims[mu]):
        s = geom.forward[mu, s]
    assert s == site


def test_lexicographic_z_fastest():
    geom = LatticeGeometry((2, 4, 4, 6))
    assert geom.site_index((0, 0, 0, 1)) == 1
    assert geom.site_index((0, 0, 1, 0)) == 6
    assert geom.site_index((1, 0, 0, 0)) == 96
    assert geom.even_sites.size == geom.odd_sites.size == geom.half_volume


def test_free_field_links_are_identity():
    cfg = generate_gauge((4, 4, 4, 4), 7, 0.0)
    assert cfg.links.shape == (256, 4, 3, 3)
    assert np.array_equal(cfg.links, np.broadcast_to(np.eye(3), cfg.links.shape))


@given(st.integers(0, 2**64 - 1), st.floats(0.05, 2.0))
def test_links_are_su3(seed, disorder):
    cfg = generate_gauge((2, 2, 2, 2), seed, disorder)
    u = cfg.links.reshape(-1, 3, 3)
    uh = np.conj(np.swapaxes(u, 1, 2))
    assert np.abs(uh @ u - np.eye(3)).max() <= 1e-12
    assert np.abs(np.linalg.det(u) - 1).max() <= 1e-12


def test_generation_is_bitwise_deterministic():
    a = generate_gauge((4, 4, 4, 4), 7, 0.3)
    b = generate_gauge((4, 4, 4, 4), 7, 0.3)
    c = generate_gauge((4, 4, 4, 4), 8, 0.3)
    assert a.links.tobytes() == b.links.tobytes()
    assert a.digest() == b.digest() != c.digest()


def test_lqgc_roundtrip(tmp_path):
    cfg = generate_gauge((4, 4, 4, 4), 7, 0.3)
    path = tmp_path / "c.lqgc"
    write_gauge(cfg, path)
    raw = path.read_bytes()
    assert raw[:4] == b"LQGC"
    assert HEADER_SIZE == 4 + 4 + 16 + 8 + 8
    assert len(raw) == HEADER_SIZE + 1024 * 144
    back = read_gauge(path)
    assert back.geometry.dims == (4, 4, 4, 4)
    assert back.seed == 7 and back.disorder == 0.3
    assert np.array_equal(back.links, cfg.links)


def test_lqgc_rejects_bad_files(tmp_path):
    cfg = generate_gauge((2, 2, 2, 2), 1, 0.2)
    path = tmp_path / "c.lqgc"
    write_gauge(cfg, path)
    raw = path.read_bytes()
    (tmp_path / "magic").write_bytes(b"XXXX" + raw[4:])
    (tmp_path / "short").write_bytes(raw[:-16])
    for name in ("magic", "short"):
        with pytest.raises(GaugeFormatError):
            read_gauge(tmp_path / name)
