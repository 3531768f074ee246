"""Hot sparse kernels, compiled with numba when available.

Set ``SELFGNN_DISABLE_NUMBA=1`` to force the pure-numpy path. Both paths are
importable at all times (``numpy_kernels`` / ``numba_kernels``) so they can be
cross-checked and benchmarked against each other.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

_DISABLED = os.environ.get("SELFGNN_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


# ---------------------------------------------------------------------------
# pure numpy
# ---------------------------------------------------------------------------


def _np_csr_spmm(indptr, indices, values, dense, n_rows):
    out = np.zeros((n_rows, dense.shape[1]), dtype=np.float64)
    if indices.shape[0] == 0:
        return out
    products = values[:, None] * dense[indices]
    nonempty = np.flatnonzero(np.diff(indptr))
    # reduceat over the starts of non-empty rows only; each segment then ends
    # exactly at the next non-empty row's start
    out[nonempty] = np.add.reduceat(products, indptr[nonempty], axis=0)
    return out


def _np_scatter_add_rows(n_rows, index, src):
    out = np.zeros((n_rows, src.shape[1]), dtype=np.float64)
    np.add.at(out, index, src)
    return out


def _np_csr_transpose(indptr, indices, values, n_cols):
    n_rows = indptr.shape[0] - 1
    rows = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(indptr))
    order = np.argsort(indices, kind="stable")
    t_indptr = np.zeros(n_cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(indices, minlength=n_cols), out=t_indptr[1:])
    return t_indptr, rows[order], values[order]


numpy_kernels = SimpleNamespace(
    csr_spmm=_np_csr_spmm,
    scatter_add_rows=_np_scatter_add_rows,
    csr_transpose=_np_csr_transpose,
    name="numpy",
)


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def _nb_csr_spmm(indptr, indices, values, dense, n_rows):
        k = dense.shape[1]
        out = np.zeros((n_rows, k), dtype=np.float64)
        # one row at a time, fixed summation order: results are reproducible
        for i in range(n_rows):
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                v = values[p]
                for c in range(k):
                    out[i, c] += v * dense[j, c]
        return out

    @numba.njit(cache=True, nogil=True)
    def _nb_scatter_add_rows(n_rows, index, src):
        k = src.shape[1]
        out = np.zeros((n_rows, k), dtype=np.float64)
        for p in range(index.shape[0]):
            r = index[p]
            for c in range(k):
                out[r, c] += src[p, c]
        return out

    @numba.njit(cache=True, nogil=True)
    def _nb_csr_transpose(indptr, indices, values, n_cols):
        n_rows = indptr.shape[0] - 1
        nnz = indices.shape[0]
        t_indptr = np.zeros(n_cols + 1, dtype=np.int64)
        for p in range(nnz):
            t_indptr[indices[p] + 1] += 1
        for c in range(n_cols):
            t_indptr[c + 1] += t_indptr[c]
        cursor = t_indptr[:-1].copy()
        t_indices = np.empty(nnz, dtype=np.int64)
        t_values = np.empty(nnz, dtype=np.float64)
        for i in range(n_rows):
            for p in range(indptr[i], indptr[i + 1]):
                c = indices[p]
                q = cursor[c]
                t_indices[q] = i
                t_values[q] = values[p]
                cursor[c] = q + 1
        return t_indptr, t_indices, t_values

    numba_kernels = SimpleNamespace(
        csr_spmm=_nb_csr_spmm,
        scatter_add_rows=_nb_scatter_add_rows,
        csr_transpose=_nb_csr_transpose,
        name="numba",
    )
else:  # pragma: no cover
    numba_kernels = None

USING_NUMBA = numba_kernels is not None and not _DISABLED
kernels = numba_kernels if USING_NUMBA else numpy_kernels
