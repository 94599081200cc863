"""Sparse SPD storage and a Jacobi-preconditioned conjugate gradient solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass
class SolveReport:
    """Outcome of one linear solve."""

    iterations: int
    relative_residual: float
    converged: bool
    # populated only when cg_solve(collect_residuals=True); one entry per iteration
    residual_norms: list[float] | None = None
    preconditioned_norms: list[float] | None = None


class SparseSpdMatrix:
    """Symmetric positive-definite matrix in CSR form.

    Construction enforces a square shape, sorted per-row column indices and
    exact (bit-level) symmetry of the stored values.
    """

    def __init__(self, matrix: sparse.csr_matrix):
        m = sparse.csr_matrix(matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got shape {m.shape}")
        m.sum_duplicates()
        m.sort_indices()
        asym = abs(m - m.T)
        if asym.nnz and asym.max() > 0.0:
            raise ValueError("matrix is not symmetric")
        self._m = m

    @classmethod
    def from_coo(cls, n: int, rows, cols, values) -> "SparseSpdMatrix":
        """Build from triplets; duplicate entries are summed."""
        coo = sparse.coo_matrix((values, (rows, cols)), shape=(n, n))
        return cls(coo.tocsr())

    @property
    def n(self) -> int:
        return self._m.shape[0]

    @property
    def indptr(self) -> np.ndarray:
        return self._m.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._m.indices

    @property
    def data(self) -> np.ndarray:
        return self._m.data

    def diagonal(self) -> np.ndarray:
        return self._m.diagonal()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._m @ x

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self._m @ x

    def toarray(self) -> np.ndarray:
        return self._m.toarray()

    def __add__(self, other: "SparseSpdMatrix") -> "SparseSpdMatrix":
        return SparseSpdMatrix(self._m + other._m)


def cg_solve(
    K: SparseSpdMatrix,
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
    x0: np.ndarray | None = None,
    collect_residuals: bool = False,
) -> tuple[np.ndarray, SolveReport]:
    """Solve K x = b with Jacobi-preconditioned conjugate gradients.

    Args:
        K: SPD system matrix.
        b: right-hand side.
        tol: relative tolerance on the true residual, ||Kx - b|| <= tol*||b||.
        max_iter: iteration cap, defaults to 20*n.
        x0: optional starting guess (zero if omitted).
        collect_residuals: record per-iteration residual norms in the report.

    Returns:
        (x, SolveReport). A non-converged solve returns the last iterate with
        converged=False; the caller decides how to proceed.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n = K.n
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({n},)")
    if max_iter is None:
        max_iter = 20 * n

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)

    diag = K.diagonal()
    if np.any(diag <= 0.0):
        raise ValueError("matrix diagonal must be strictly positive for Jacobi CG")
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - (K @ x)
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)

    res_norms: list[float] | None = [] if collect_residuals else None
    pre_norms: list[float] | None = [] if collect_residuals else None

    r_norm = float(np.linalg.norm(r))
    if r_norm <= tol * b_norm:
        return x, SolveReport(0, r_norm / b_norm, True, res_norms, pre_norms)

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Kp = K @ p
        alpha = rz / float(p @ Kp)
        x += alpha * p
        r -= alpha * Kp
        z = inv_diag * r
        rz_new = float(r @ z)
        r_norm = float(np.linalg.norm(r))
        if collect_residuals:
            res_norms.append(r_norm)
            pre_norms.append(np.sqrt(max(rz_new, 0.0)))
        if r_norm <= tol * b_norm:
            converged = True
            break
        p = z + (rz_new / rz) * p
        rz = rz_new

    return x, SolveReport(it, r_norm / b_norm, converged, res_norms, pre_norms)
