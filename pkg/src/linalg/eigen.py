import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.errors import DimensionMismatchError, NonSymmetricError

MAX_DIM = 32
MAX_SWEEPS = 60
# порог пропуска вращения относительно sqrt(|a_pp a_qq|)
RELATIVE_SKIP = 1e-15


@dataclass(frozen=True, eq=False)
class DenseSymMatrix:
    """Маленькая плотная симметричная матрица (например, K_ℓ = U_ℓᵀAU_ℓ)."""
    dim: int
    values: Tuple[float, ...]

    @classmethod
    def from_array(cls, array) -> "DenseSymMatrix":
        array = np.asarray(array, dtype=float)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise DimensionMismatchError(f"Ожидалась квадратная матрица, получено {array.shape}")
        return cls(dim=array.shape[0], values=tuple(array.ravel().tolist()))

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float).reshape(self.dim, self.dim)


def _rotate(a, v, p: int, q: int, n: int) -> None:
    apq = a[p][q]
    theta = (a[q][q] - a[p][p]) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 1.0 / (2.0 * theta)
    else:
        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c

    row_p, row_q = a[p], a[q]
    for k in range(n):
        if k == p or k == q:
            continue
        akp, akq = row_p[k], row_q[k]
        new_p = c * akp - s * akq
        new_q = s * akp + c * akq
        row_p[k] = new_p
        a[k][p] = new_p
        row_q[k] = new_q
        a[k][q] = new_q
    row_p[p] -= t * apq
    row_q[q] += t * apq
    row_p[q] = 0.0
    row_q[p] = 0.0

    for row in v:
        vkp, vkq = row[p], row[q]
        row[p] = c * vkp - s * vkq
        row[q] = s * vkp + c * vkq


def sym_eig_small(k) -> Tuple[np.ndarray, np.ndarray]:
    """
    Собственные пары малой симметричной матрицы циклическим методом Якоби.

    Возвращает (собственные значения по убыванию, матрица собственных векторов
    по столбцам). Вращение (p, q) пропускается, если
    |a_pq| <= 1e-15 * sqrt(|a_pp a_qq|); это сохраняет относительную точность
    маленьких собственных значений градуированных матриц Крылова.
    Итерации идут до полного прохода без вращений.
    """
    array = k.to_array() if isinstance(k, DenseSymMatrix) else np.asarray(k, dtype=float)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise DimensionMismatchError(f"Ожидалась квадратная матрица, получено {array.shape}")
    n = array.shape[0]
    if n > MAX_DIM:
        raise DimensionMismatchError(f"sym_eig_small рассчитан на размер <= {MAX_DIM}, получено {n}")
    scale = float(np.abs(array).max()) if n else 0.0
    if n and not np.allclose(array, array.T, rtol=0.0, atol=1e-12 * max(scale, 1e-300)):
        raise NonSymmetricError("sym_eig_small: матрица несимметрична")

    # вращения на списках Python, размер K не больше 32
    a = (0.5 * (array + array.T)).tolist()
    v = np.eye(n).tolist()

    for sweep in range(MAX_SWEEPS):
        rotations = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if abs(apq) <= RELATIVE_SKIP * math.sqrt(abs(a[p][p] * a[q][q])) or apq == 0.0:
                    a[p][q] = a[q][p] = 0.0
                    continue
                _rotate(a, v, p, q, n)
                rotations += 1
        if rotations == 0:
            break
    else:
        logging.warning(f"⚠️ Якоби: не сошёлся за {MAX_SWEEPS} проходов (n={n})")

    eigenvalues = np.array([a[i][i] for i in range(n)])
    vectors = np.array(v).reshape(n, n)
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], vectors[:, order]


def reconstruct(eigenvalues: Sequence[float], eigenvectors: np.ndarray) -> np.ndarray:
    """ΨΛΨᵀ: для проверки разложения."""
    eigenvectors = np.asarray(eigenvectors, dtype=float)
    return (eigenvectors * np.asarray(eigenvalues, dtype=float)) @ eigenvectors.T
