"""Block bookkeeping for scalar CSR matrices laid out as (point, fiber) pairs.

Row ``x*k + i`` is fiber basis vector ``i`` at point ``x``.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def as_csr(M, shape=None) -> sp.csr_array:
    out = sp.csr_array(M, shape=shape, dtype=np.complex128)
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def block_norms_sq(M: sp.csr_array, k_row: int, k_col: int) -> sp.coo_array:
    """Squared Frobenius norm of every structurally non-zero block."""
    coo = M.tocoo()
    n_row = M.shape[0] // k_row
    n_col = M.shape[1] // k_col
    out = sp.coo_array(
        (np.abs(coo.data) ** 2, (coo.row // k_row, coo.col // k_col)), shape=(n_row, n_col))
    out.sum_duplicates()
    return out


def block_max_abs(M: sp.csr_array, k_row: int, k_col: int):
    """(block rows, block cols, max |entry|) over blocks with a stored entry."""
    coo = M.tocoo()
    if coo.nnz == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    n_col = M.shape[1] // k_col
    key = (coo.row // k_row).astype(np.int64) * n_col + coo.col // k_col
    order = np.argsort(key, kind="stable")
    key = key[order]
    vals = np.abs(coo.data[order])
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    mx = np.maximum.reduceat(vals, starts)
    uk = key[starts]
    return uk // n_col, uk % n_col, mx


def prune_blocks(M: sp.csr_array, k_row: int, k_col: int, tol: float) -> sp.csr_array:
    """Drop every block whose largest entry is below ``tol``."""
    M = as_csr(M)
    if tol <= 0 or M.nnz == 0:
        return M
    br, bc, mx = block_max_abs(M, k_row, k_col)
    small = mx < tol
    if not small.any():
        return M
    n_col = M.shape[1] // k_col
    dead = set((br[small] * n_col + bc[small]).tolist())
    coo = M.tocoo()
    key = (coo.row // k_row).astype(np.int64) * n_col + coo.col // k_col
    keep = ~np.isin(key, np.fromiter(dead, dtype=np.int64))
    return as_csr(sp.coo_array((coo.data[keep], (coo.row[keep], coo.col[keep])), shape=M.shape))


def block_pattern(M: sp.csr_array, k_row: int, k_col: int, tol: float = 0.0):
    """Block coordinates (rows, cols) whose Frobenius norm exceeds ``tol``."""
    norms = block_norms_sq(M, k_row, k_col)
    keep = norms.data > tol * tol
    return norms.row[keep].astype(np.int64), norms.col[keep].astype(np.int64)


def fiber_indices(points, k: int) -> np.ndarray:
    points = np.asarray(points, dtype=np.int64)
    return (points[:, None] * k + np.arange(k)[None, :]).ravel()
