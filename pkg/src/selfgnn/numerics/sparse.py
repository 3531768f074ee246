from __future__ import annotations

import numpy as np

from .._accel import kernels


class SparseMatrix:
    """Immutable CSR matrix of float64 values.

    Entries are kept sorted by (row, col). The transpose is built lazily and
    cached, since graph propagation needs both directions.
    """

    __slots__ = ("shape", "indptr", "indices", "values", "_rows", "_transpose")

    def __init__(self, indptr, indices, values, shape):
        self.shape = (int(shape[0]), int(shape[1]))
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self._rows = None
        self._transpose = None

    @classmethod
    def from_coo(cls, rows, cols, values, shape) -> "SparseMatrix":
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if np.isscalar(values) or np.ndim(values) == 0:
            values = np.full(rows.shape[0], float(values))
        values = np.asarray(values, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == values.shape):
            raise ValueError("rows, cols and values must have equal length")
        n_rows, n_cols = int(shape[0]), int(shape[1])
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols:
                raise ValueError(f"entry index out of bounds for shape {(n_rows, n_cols)}")
        if not np.all(np.isfinite(values)):
            raise ValueError("sparse values must be finite")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate entry ({rows[k]}, {cols[k]})")
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
        out = cls(indptr, cols, values, (n_rows, n_cols))
        out._rows = rows
        return out

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        return cls.from_coo(rows, cols, dense[rows, cols], dense.shape)

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])

    @property
    def rows(self) -> np.ndarray:
        """Row index of every stored entry, in storage order."""
        if self._rows is None:
            self._rows = np.repeat(np.arange(self.shape[0], dtype=np.int64), np.diff(self.indptr))
        return self._rows

    @property
    def cols(self) -> np.ndarray:
        return self.indices

    @property
    def T(self) -> "SparseMatrix":
        if self._transpose is None:
            t_indptr, t_indices, t_values = kernels.csr_transpose(
                self.indptr, self.indices, self.values, self.shape[1]
            )
            t = SparseMatrix(t_indptr, t_indices, t_values, (self.shape[1], self.shape[0]))
            t._transpose = self
            self._transpose = t
        return self._transpose

    def row_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def col_degrees(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.shape[1])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        out[self.rows, self.indices] = self.values
        return out

    def matmul(self, dense: np.ndarray) -> np.ndarray:
        dense = np.ascontiguousarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != self.shape[1]:
            raise ValueError(f"cannot multiply sparse {self.shape} by dense {dense.shape}")
        return kernels.csr_spmm(self.indptr, self.indices, self.values, dense, self.shape[0])

    def mask_entries(self, keep: np.ndarray, scale: float = 1.0) -> "SparseMatrix":
        """Copy keeping only entries where ``keep`` is true, values multiplied by ``scale``."""
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (self.nnz,):
            raise ValueError("keep mask must have one flag per stored entry")
        kept_rows = self.rows[keep]
        indptr = np.zeros(self.shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(kept_rows, minlength=self.shape[0]), out=indptr[1:])
        out = SparseMatrix(indptr, self.indices[keep], self.values[keep] * scale, self.shape)
        out._rows = kept_rows
        return out

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"
