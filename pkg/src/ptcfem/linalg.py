"""Sparse matrix arithmetic and direct solves for the Newton-like systems.

Matrices are scipy CSR matrices throughout.  The helpers here pin the
behavior the solver relies on: structure-preserving linear combinations
(entries that cancel numerically stay in the pattern) and a direct solver
that reports singularity as a typed signal instead of returning garbage.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class SingularMatrixError(Exception):
    """Structurally or numerically singular system.

    ``pivot`` carries the offending pivot position when it is known.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


def _as_csr(A):
    if not sp.issparse(A):
        raise TypeError("expected a scipy sparse matrix")
    return A.tocsr()


def add_scaled(A, B, a, b):
    """a*A + b*B over the merged sparsity pattern.

    Unlike plain CSR addition, entries whose sum happens to be zero are kept
    in the pattern (stored as explicit zeros).
    """
    A, B = _as_csr(A), _as_csr(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    Ac, Bc = A.tocoo(), B.tocoo()
    rows = np.concatenate([Ac.row, Bc.row])
    cols = np.concatenate([Ac.col, Bc.col])
    vals = np.concatenate([a * Ac.data, b * Bc.data])
    out = sp.coo_matrix((vals, (rows, cols)), shape=A.shape).tocsr()
    out.sort_indices()
    return out


def matvec(A, x):
    A = _as_csr(A)
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def transpose_product(A):
    """A^T A as a sparse matrix (symmetric positive semidefinite)."""
    A = _as_csr(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    out = (A.T @ A).tocsr()
    out.sort_indices()
    return out


def transpose_apply(A, v):
    A = _as_csr(A)
    v = np.asarray(v, dtype=float)
    if v.shape != (A.shape[0],):
        raise ValueError(f"dimension mismatch: {A.shape}^T @ {v.shape}")
    return A.T @ v


def direct_solve(A, rhs):
    """Solve A x = rhs by sparse LU with partial pivoting.

    Raises :class:`SingularMatrixError` when factorization fails or a pivot
    falls below ``1e-14 * max|A|``.
    """
    A = _as_csr(A)
    n, m = A.shape
    if n != m:
        raise ValueError("matrix must be square")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (n,):
        raise ValueError(f"dimension mismatch: {A.shape} vs rhs {rhs.shape}")
    if n == 0:
        return np.zeros(0)
    try:
        lu = splu(A.tocsc())
    except RuntimeError as exc:
        raise SingularMatrixError(f"sparse LU failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    scale = np.abs(A.data).max() if A.nnz else 0.0
    bad = np.flatnonzero(diag <= 1e-14 * scale)
    if bad.size:
        k = int(bad[0])
        raise SingularMatrixError(
            f"numerically singular: pivot {k} is {diag[k]:.3e}", pivot=k)
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("solution contains non-finite entries")
    return x


def zero_matrix(n):
    return sp.csr_matrix((n, n))


def to_triplet_text(A):
    """One-based ``i j value`` triplet dump for debugging."""
    coo = _as_csr(A).tocoo()
    lines = [f"{i + 1} {j + 1} {v:.17g}"
             for i, j, v in zip(coo.row, coo.col, coo.data)]
    return "\n".join(lines) + ("\n" if lines else "")
