"""Matrix Market export of dense assemblies.

Entries are written as ``matrix coordinate complex general`` with 1-based
indices, nonzeros only, in column-major order (column, then row).
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse


def write_matrix_market(path, A: np.ndarray, comment: str = "") -> int:
    """Write ``A`` and return the number of stored entries."""
    A = np.asarray(A, dtype=complex)
    cols, rows = np.nonzero(A.T)  # column-major traversal
    coo = scipy.sparse.coo_matrix((A[rows, cols], (rows, cols)), shape=A.shape)
    scipy.io.mmwrite(str(path), coo, comment=comment, field="complex", precision=17, symmetry="general")
    return int(rows.size)


def read_matrix_market(path) -> np.ndarray:
    return scipy.io.mmread(str(path)).toarray()
