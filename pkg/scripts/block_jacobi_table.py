"""GMRES iteration counts with and without block-Jacobi and a degree-4 polynomial.

One row per seed; the last row holds column means.  Writes
``results/block_jacobi_table.csv``.
"""

import dataclasses

import numpy as np

from coarsekit.bench import run_sequence
from coarsekit.dirac import DiracParams
from coarsekit.krylov import SolverConfig
from coarsekit.lattice import generate_gauge
from coarsekit.stack import StackConfig

from _common import write_rows


@dataclasses.dataclass
class Config:
    dims: tuple = (4, 4, 4, 4)
    seeds: tuple = tuple(range(100, 110))
    disorder: float = 0.3
    m0: float = -0.35
    csw: float = 1.0
    m: int = 60
    max_restarts: int = 200
    tol: float = 1e-8
    degree: int = 4


def main(cfg=Config()):
    sc = SolverConfig(m=cfg.m, max_restarts=cfg.max_restarts, tol=cfg.tol)
    columns = {
        "plain": StackConfig("gmres", sc),
        "block_jacobi": StackConfig("gmres", sc, block_jacobi=True),
        "poly": StackConfig("gmres", sc, poly_degree=cfg.degree),
        "block_jacobi_poly": StackConfig("gmres", sc, block_jacobi=True, poly_degree=cfg.degree),
    }
    rows = []
    for seed in cfg.seeds:
        gauge = generate_gauge(cfg.dims, seed, cfg.disorder)
        row = {"seed": seed}
        for name, stack in columns.items():
            row[name] = run_sequence(DiracParams(cfg.m0, cfg.csw), gauge, stack, (0,)).iterations
        rows.append(row)
        print(row)
    rows.append({"seed": "mean", **{k: float(np.mean([r[k] for r in rows])) for k in columns}})
    write_rows("block_jacobi_table.csv", rows)


if __name__ == "__main__":
    main()
