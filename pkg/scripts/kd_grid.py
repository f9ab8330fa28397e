"""Reduction phases over a (k, d) grid near the critical mass.

k is the recycle dimension (0 means plain GMRES), d the polynomial degree
(0 means none).  Writes ``results/kd_grid.csv``.
"""

import dataclasses

from coarsekit.bench import find_critical_mass, kd_grid
from coarsekit.dirac import DiracParams
from coarsekit.krylov import SolverConfig
from coarsekit.lattice import generate_gauge

from _common import write_rows


@dataclasses.dataclass
class Config:
    dims: tuple = (4, 4, 4, 4)
    seed: int = 3
    disorder: float = 0.3
    csw: float = 1.0
    offset: float = 0.001
    ks: tuple = (0, 2, 4, 8, 16)
    ds: tuple = (0, 2, 4, 8)
    m: int = 60
    max_restarts: int = 200
    tol: float = 1e-2
    block_jacobi: bool = True


def main(cfg=Config()):
    gauge = generate_gauge(cfg.dims, cfg.seed, cfg.disorder)
    crit = find_critical_mass(gauge, cfg.csw)
    m0 = crit.m_crit + cfg.offset
    print(f"m_crit {crit.m_crit:.6f}, running at m0 {m0:.6f}")
    rows = kd_grid(DiracParams(m0, cfg.csw), gauge, cfg.ks, cfg.ds,
                   SolverConfig(m=cfg.m, max_restarts=cfg.max_restarts, tol=cfg.tol),
                   block_jacobi=cfg.block_jacobi)
    for r in rows:
        r["m0"] = m0
    write_rows("kd_grid.csv", rows)


if __name__ == "__main__":
    main()
