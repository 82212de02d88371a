import logging
from typing import Tuple

import numpy as np

from src.errors import DimensionMismatchError, SolverDivergenceError
from src.linalg.sparse import SparseMatrix, spmv


def pcg_solve(a: SparseMatrix, b, tol: float = 1e-10, max_iter: int = 1000) -> Tuple[np.ndarray, int]:
    """
    Метод сопряжённых градиентов с диагональным (Якоби) предобуславливателем.

    Запасной путь на случай, когда разложение Холецкого не помещается в память.
    Останавливается, когда ||b - a·x||₂ / ||b||₂ <= tol, либо по max_iter
    (тогда выводится предупреждение, а число итераций равно max_iter).
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != a.n_rows:
        raise DimensionMismatchError(f"pcg: длина правой части {b.shape} != {a.n_rows}")
    if tol <= 0:
        raise ValueError("tol должен быть положительным")
    if max_iter < 0:
        raise ValueError(f"max_iter должен быть >= 0, получено {max_iter}")

    x = np.zeros_like(b)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return x, 0

    inv_diag = 1.0 / a.diagonal()
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    gamma = r @ z
    rel_res = 1.0
    for iteration in range(1, max_iter + 1):
        ap = spmv(a, p)
        alpha = gamma / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        rel_res = np.linalg.norm(r) / norm_b
        if not np.isfinite(rel_res):
            raise SolverDivergenceError(f"pcg: NaN/Inf на итерации {iteration}")
        if rel_res <= tol:
            logging.debug(f"pcg сошёлся за {iteration} итераций, невязка {rel_res:.3e}")
            return x, iteration
        z = inv_diag * r
        gamma_old, gamma = gamma, r @ z
        p = z + (gamma / gamma_old) * p

    logging.warning(f"⚠️ pcg: достигнут предел {max_iter} итераций, невязка {rel_res:.3e}")
    return x, max_iter
