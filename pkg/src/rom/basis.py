import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.errors import DimensionMismatchError, NotPositiveDefiniteError, ZeroLoadVectorError
from src.fem.assembly import FemSystem
from src.linalg.cholesky import cholesky_solve
from src.linalg.eigen import sym_eig_small
from src.linalg.sparse import spmv

DEFAULT_ELL = 10
DEFAULT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class RomBasis:
    """
    Редуцированный базис. Столбцы q содержат коэффициенты V-ортонормированных функций
    φ̃_i = λ_i^{-1/2}·U·ψ_i, так что qᵀAq = I_r.

    krylov: матрица Крылова U (после нормировки u₁ᵀAu₁ = 1),
    gram: последняя матрица K_i = UᵀAU, eigenvalue_history: спектры K_1..K_i.
    """
    q: np.ndarray
    retained_eigenvalues: np.ndarray
    ell_requested: int
    r: int
    krylov: np.ndarray
    gram: np.ndarray
    eigenvalue_history: Tuple[np.ndarray, ...]
    krylov_solves: int


def _border(k: np.ndarray, alpha: np.ndarray, beta: float) -> np.ndarray:
    """K_i = [[K_{i-1}, αᵀ], [α, β]]."""
    size = k.shape[0] + 1
    bordered = np.empty((size, size))
    bordered[:-1, :-1] = k
    bordered[-1, :-1] = alpha
    bordered[:-1, -1] = alpha
    bordered[-1, -1] = beta
    return bordered


def get_matrix_q(
    sys: FemSystem,
    b,
    ell: int = DEFAULT_ELL,
    tol: float = DEFAULT_TOL,
    fixed_rank: bool = False,
) -> RomBasis:
    """
    Строит матрицу проекции Q по последовательности Крылова
    A u₁ = b, A u_i = M u_{i-1}.

    Матрица K_i = U_iᵀAU_i наращивается окаймлением; после каждого шага
    считается её спектр, и цикл прерывается, как только наименьшее
    собственное значение <= tol. Тогда Q = U_i Ψ(:, 1:i-1) Λ^{-1/2}.

    Последовательность масштабируется так, чтобы u₁ᵀAu₁ = 1: подпространство
    и Q от этого не меняются, а tol становится относительным порогом.
    При fixed_rank=True обрыв по tol не делается: строятся все ℓ векторов
    и сохраняются все собственные пары выше уровня округления.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (sys.n,):
        raise DimensionMismatchError(f"Вектор нагрузки {b.shape} не совпадает с размером системы {sys.n}")
    if ell < 1:
        raise ValueError(f"ell должен быть >= 1, получено {ell}")
    if tol <= 0:
        raise ValueError(f"tol должен быть > 0, получено {tol}")
    if not np.any(b):
        raise ZeroLoadVectorError("Нулевой вектор нагрузки: последовательность Крылова не определена")

    stiffness, mass, factor = sys.stiffness, sys.mass, sys.stiffness_factor

    u = cholesky_solve(factor, b)
    energy = float(u @ b)
    if not energy > 0:
        raise NotPositiveDefiniteError(f"u₁ᵀAu₁ = {energy:.3e} <= 0")
    u /= np.sqrt(energy)

    vectors: List[np.ndarray] = [u]
    a_u = spmv(stiffness, u)
    k = np.array([[float(u @ a_u)]])
    eigenvalues, eigenvectors = k.diagonal().copy(), np.eye(1)
    history = [eigenvalues]
    keep = None

    for i in range(2, ell + 1):
        u_new = cholesky_solve(factor, spmv(mass, vectors[-1]))
        a_u_new = spmv(stiffness, u_new)
        # строка окаймления: (u_j, u_i)_V для всех уже построенных u_j
        alpha = np.array([v @ a_u_new for v in vectors])
        beta = float(u_new @ a_u_new)
        k = _border(k, alpha, beta)
        vectors.append(u_new)

        eigenvalues, eigenvectors = sym_eig_small(k)
        history.append(eigenvalues)
        if not fixed_rank and eigenvalues[-1] <= tol:
            keep = i - 1
            break

    if keep is None:
        floor = tol if not fixed_rank else len(vectors) * np.finfo(float).eps * eigenvalues[0]
        keep = max(1, int(np.count_nonzero(eigenvalues > floor)))

    krylov = np.column_stack(vectors)
    retained = eigenvalues[:keep]
    q = krylov @ (eigenvectors[:, :keep] / np.sqrt(retained))

    logging.debug(f"ROM базис: {len(vectors)} векторов Крылова, ранг r={keep}, λ_min={retained[-1]:.3e}")
    return RomBasis(
        q=q,
        retained_eigenvalues=retained,
        ell_requested=ell,
        r=keep,
        krylov=krylov,
        gram=k,
        eigenvalue_history=tuple(history),
        krylov_solves=len(vectors),
    )
