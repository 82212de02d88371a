import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from src.errors import DimensionMismatchError, NotPositiveDefiniteError
from src.linalg.sparse import SparseMatrix, csr_from_triplets


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """
    Разложение P·a·Pᵀ = L·Lᵀ.

    permutation[k]: исходный индекс k-й строки переставленной матрицы.
    Сам множитель хранится в ленточном виде LAPACK (banded[k, j] = L[j+k, j]),
    разреженная копия L строится по требованию.
    """
    permutation: np.ndarray
    banded: np.ndarray

    @property
    def n(self) -> int:
        return int(self.permutation.size)

    @property
    def bandwidth(self) -> int:
        return self.banded.shape[0] - 1

    @cached_property
    def lower_factor(self) -> SparseMatrix:
        n, rows, cols, vals = self.n, [], [], []
        for k in range(self.bandwidth + 1):
            j = np.arange(n - k)
            rows.append(j + k)
            cols.append(j)
            vals.append(self.banded[k, : n - k])
        return csr_from_triplets(n, n, (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)))


def _lower_band(a: SparseMatrix, perm: np.ndarray) -> np.ndarray:
    permuted = a.csr[perm][:, perm].tocoo()
    lower = permuted.row >= permuted.col
    rows, cols, vals = permuted.row[lower], permuted.col[lower], permuted.data[lower]
    bandwidth = int((rows - cols).max()) if rows.size else 0
    banded = np.zeros((bandwidth + 1, a.n_rows))
    banded[rows - cols, cols] = vals
    return banded


def cholesky_factor(a: SparseMatrix, ordering: str = "rcm") -> CholeskyFactor:
    """
    Разложение Холецкого для симметричной положительно определённой матрицы.

    Перед разложением строки и столбцы переупорядочиваются обратным
    алгоритмом Катхилла–Макки, чтобы сузить ленту; затем работает
    ленточный Холецкий LAPACK. ordering="natural" отключает перестановку.
    """
    if a.n_rows != a.n_cols:
        raise DimensionMismatchError(f"Холецкий требует квадратную матрицу, получено {a.shape}")

    if ordering == "rcm":
        perm = np.asarray(reverse_cuthill_mckee(a.csr, symmetric_mode=True), dtype=np.int64)
    elif ordering == "natural":
        perm = np.arange(a.n_rows, dtype=np.int64)
    else:
        raise ValueError(f"Неизвестное упорядочивание: {ordering}")

    banded = _lower_band(a, perm)
    try:
        factor = sla.cholesky_banded(banded, lower=True, check_finite=True)
    except (sla.LinAlgError, ValueError) as e:
        raise NotPositiveDefiniteError(f"Матрица не положительно определена: {e}") from e

    logging.debug(f"Холецкий: n={a.n_rows}, ширина ленты {banded.shape[0] - 1}")
    return CholeskyFactor(permutation=perm, banded=factor)


def cholesky_solve(f: CholeskyFactor, b) -> np.ndarray:
    """Решает a·x = b прямой и обратной подстановкой по готовому множителю."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != f.n:
        raise DimensionMismatchError(f"Длина правой части {b.shape} не совпадает с размером {f.n}")
    x = np.empty_like(b)
    x[f.permutation] = sla.cho_solve_banded((f.banded, True), b[f.permutation], check_finite=False)
    return x
