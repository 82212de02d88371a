import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sps

from src.errors import DimensionMismatchError, IndexOutOfRangeError, NonSymmetricError

Triplets = Union[Iterable[Tuple[int, int, float]], Tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """
    Разреженная матрица в формате CSR.

    Хранит массу M и жёсткость A после исключения граничных узлов.
    После создания не изменяется, поэтому её можно разделять между потоками.
    """
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    symmetric: bool = field(default=False)

    @cached_property
    def csr(self) -> sps.csr_matrix:
        """Представление scipy для быстрых произведений (строится один раз)."""
        return sps.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.n_rows, self.n_cols),
        )

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_rows, self.n_cols

    def value(self, i: int, j: int) -> float:
        start, stop = self.row_offsets[i], self.row_offsets[i + 1]
        pos = np.searchsorted(self.col_indices[start:stop], j)
        if pos < stop - start and self.col_indices[start + pos] == j:
            return float(self.values[start + pos])
        return 0.0

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def is_structurally_symmetric(self) -> bool:
        """Точная (побитовая) проверка value(i,j) == value(j,i)."""
        if self.n_rows != self.n_cols:
            return False
        diff = (self.csr - self.csr.T).tocsr()
        diff.eliminate_zeros()
        return diff.nnz == 0

    @classmethod
    def from_scipy(cls, matrix: sps.spmatrix, symmetric: bool = False) -> "SparseMatrix":
        csr = sps.csr_matrix(matrix, dtype=float)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(
            n_rows=csr.shape[0],
            n_cols=csr.shape[1],
            row_offsets=csr.indptr.astype(np.int64),
            col_indices=csr.indices.astype(np.int64),
            values=csr.data.astype(float),
            symmetric=symmetric,
        )


def _split_triplets(triplets: Triplets) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(triplets, tuple) and len(triplets) == 3 and all(
        isinstance(part, np.ndarray) for part in triplets
    ):
        rows, cols, vals = triplets
    else:
        items = list(triplets)
        if not items:
            return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, float)
        rows, cols, vals = (np.asarray(part) for part in zip(*items))
    return (
        np.asarray(rows, dtype=np.int64).ravel(),
        np.asarray(cols, dtype=np.int64).ravel(),
        np.asarray(vals, dtype=float).ravel(),
    )


def csr_from_triplets(n_rows: int, n_cols: int, triplets: Triplets, symmetric: bool = False) -> SparseMatrix:
    """
    Собирает CSR-матрицу из списка (row, col, value).

    Повторяющиеся позиции суммируются, строки сортируются,
    элементы, ставшие точно нулевыми после суммирования, отбрасываются.
    Триплеты можно передать и как кортеж трёх numpy-массивов (так быстрее при сборке МКЭ).
    При symmetric=True симметрия значений проверяется (NonSymmetricError).
    """
    rows, cols, vals = _split_triplets(triplets)
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols:
            raise IndexOutOfRangeError(
                f"Индекс триплета вне диапазона матрицы {n_rows}x{n_cols}"
            )
    coo = sps.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))
    matrix = SparseMatrix.from_scipy(coo.tocsr(), symmetric=symmetric)
    if symmetric and not matrix.is_structurally_symmetric():
        raise NonSymmetricError(f"Матрица {n_rows}x{n_cols} помечена симметричной, но value(i,j) != value(j,i)")
    logging.debug(f"CSR {n_rows}x{n_cols}: {matrix.nnz} ненулевых из {rows.size} триплетов")
    return matrix


def spmv(a: SparseMatrix, x: Sequence[float]) -> np.ndarray:
    """Произведение разреженной матрицы на вектор."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != a.n_cols:
        raise DimensionMismatchError(
            f"spmv: длина вектора {x.shape} не совпадает с числом столбцов {a.n_cols}"
        )
    return a.csr @ x


def linear_combination(alpha: float, a: SparseMatrix, beta: float, b: SparseMatrix) -> SparseMatrix:
    """alpha*a + beta*b; используется для матриц неявных шагов по времени."""
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Несовпадение форм {a.shape} и {b.shape}")
    return SparseMatrix.from_scipy(alpha * a.csr + beta * b.csr, symmetric=a.symmetric and b.symmetric)
