"""Dense symmetric linear algebra on small packed systems.

Symmetric matrices are stored packed: the lower triangle, row by row, in a
flat array of length n*(n+1)/2.  This layout coincides with the BLAS/LAPACK
packed-'U' convention (upper triangle, column major), so the packed routines
of scipy can operate on the buffers directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import blas as _blas
from scipy.linalg import lapack as _lapack


class DimensionMismatch(ValueError):
    """Operands do not agree in size."""


class SingularSystem(ArithmeticError):
    """The factorization hit a zero pivot; the system has no unique solution."""


@lru_cache(maxsize=None)
def packed_index_arrays(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index of every packed entry, in storage order."""
    rows = np.repeat(np.arange(order), np.arange(1, order + 1))
    cols = np.concatenate([np.arange(r + 1) for r in range(order)]) if order else np.empty(0, int)
    return rows.astype(np.int64), cols.astype(np.int64)


@lru_cache(maxsize=None)
def packed_diag_indices(order: int) -> np.ndarray:
    """Positions of the diagonal elements within the packed buffer."""
    r = np.arange(order, dtype=np.int64)
    return r * (r + 1) // 2 + r


def packed_length(order: int) -> int:
    return order * (order + 1) // 2


@dataclass(frozen=True)
class PackedSymmetric:
    """Symmetric matrix of the given order, lower triangle stored row by row."""

    order: int
    entries: np.ndarray

    def __post_init__(self):
        if self.order < 0:
            raise ValueError(f"order must be non-negative, got {self.order}")
        entries = np.asarray(self.entries, dtype=np.float64)
        object.__setattr__(self, "entries", entries)
        if entries.shape != (packed_length(self.order),):
            raise DimensionMismatch(
                f"packed storage of order {self.order} needs "
                f"{packed_length(self.order)} entries, got {entries.shape}"
            )

    @classmethod
    def zeros(cls, order: int) -> "PackedSymmetric":
        return cls(order, np.zeros(packed_length(order)))

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "PackedSymmetric":
        dense = np.asarray(dense, dtype=np.float64)
        n = dense.shape[0]
        if dense.shape != (n, n):
            raise DimensionMismatch(f"expected a square matrix, got {dense.shape}")
        rows, cols = packed_index_arrays(n)
        return cls(n, dense[rows, cols].copy())

    def to_dense(self) -> np.ndarray:
        n = self.order
        rows, cols = packed_index_arrays(n)
        dense = np.empty((n, n))
        dense[rows, cols] = self.entries
        dense[cols, rows] = self.entries
        return dense

    def diagonal(self) -> np.ndarray:
        return self.entries[packed_diag_indices(self.order)]

    def element(self, r: int, c: int) -> float:
        if not (0 <= r < self.order and 0 <= c < self.order):
            raise IndexError((r, c))
        if r < c:
            r, c = c, r
        return float(self.entries[r * (r + 1) // 2 + c])

    def add_diagonal(self, value) -> "PackedSymmetric":
        """New matrix with `value` (scalar or per-row vector) added on the diagonal."""
        out = self.entries.copy()
        out[packed_diag_indices(self.order)] += value
        return PackedSymmetric(self.order, out)


def _check_vector(matrix: PackedSymmetric, vector: np.ndarray) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (matrix.order,):
        raise DimensionMismatch(
            f"matrix of order {matrix.order} against vector of shape {vector.shape}"
        )
    return vector


def solve_symmetric(coefficients: PackedSymmetric, ordinates: np.ndarray) -> np.ndarray:
    """Solve the symmetric system `coefficients @ x = ordinates`.

    Uses a symmetric indefinite factorization with pivoting (LAPACK dsysv);
    positive definiteness is not assumed.  Raises SingularSystem on a zero
    pivot.
    """
    b = _check_vector(coefficients, ordinates)
    n = coefficients.order
    if n == 0:
        return np.empty(0)
    a = coefficients.to_dense()
    _, _, x, info = _lapack.dsysv(a, b)
    if info > 0:
        raise SingularSystem(f"zero pivot in block {info} of the factorization")
    if info < 0:
        raise ValueError(f"illegal argument {-info} passed to dsysv")
    return x


def sym_mat_vec(matrix: PackedSymmetric, vector: np.ndarray) -> np.ndarray:
    """Product of a packed symmetric matrix with a vector (BLAS dspmv)."""
    x = _check_vector(matrix, vector)
    if matrix.order == 0:
        return np.empty(0)
    return _blas.dspmv(matrix.order, 1.0, matrix.entries, x, beta=0.0, lower=0)


def dot(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"dot of shapes {a.shape} and {b.shape}")
    return float(np.dot(a, b))
