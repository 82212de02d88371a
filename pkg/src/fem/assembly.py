import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from src.errors import DimensionMismatchError, MeshError, NotPositiveDefiniteError
from src.fem.mesh import Mesh, NodalFunction
from src.linalg.cholesky import CholeskyFactor, cholesky_factor, cholesky_solve
from src.linalg.sparse import SparseMatrix, csr_from_triplets, spmv

# эталонная матрица масс P1-треугольника, умножается на площадь/12
_REFERENCE_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])


@dataclass(frozen=True, eq=False)
class FemSystem:
    """
    Матрицы МКЭ на внутренних степенях свободы.

    Жёсткость раскладывается один раз при сборке; это разложение переиспользуют
    и решатель Крылова, и все построения ROM внутри одного обратного прогона.
    """
    mesh: Mesh
    mass: SparseMatrix
    stiffness: SparseMatrix
    stiffness_factor: CholeskyFactor

    @property
    def n(self) -> int:
        return self.mesh.n_dofs

    @cached_property
    def mass_factor(self) -> CholeskyFactor:
        return cholesky_factor(self.mass)


def local_matrices(p0: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Локальные матрицы масс и жёсткости треугольников с вершинами p0, p1, p2
    (массивы формы (T, 2)); результат формы (T, 3, 3).

    Градиенты барицентрических координат берутся в замкнутом виде,
    поэтому интегралы точные.
    """
    p0, p1, p2 = (np.atleast_2d(np.asarray(p, dtype=float)) for p in (p0, p1, p2))
    area = 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))
    if np.any(area <= 0):
        raise MeshError("Сетка содержит вырожденные или неверно ориентированные треугольники")

    dx = np.stack([p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]], axis=1) / (2 * area[:, None])
    dy = np.stack([p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]], axis=1) / (2 * area[:, None])

    stiffness = area[:, None, None] * (dx[:, :, None] * dx[:, None, :] + dy[:, :, None] * dy[:, None, :])
    mass = (area / 12.0)[:, None, None] * _REFERENCE_MASS[None, :, :]
    return mass, stiffness


def element_matrices(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    return local_matrices(*(mesh.node_coords[mesh.triangles[:, k]] for k in range(3)))


def _assemble_interior(mesh: Mesh, local: np.ndarray) -> SparseMatrix:
    dofs = mesh.interior_map[mesh.triangles]
    rows = np.broadcast_to(dofs[:, :, None], local.shape)
    cols = np.broadcast_to(dofs[:, None, :], local.shape)
    # исключение граничных узлов: берём только пары внутренних степеней свободы
    keep = (rows >= 0) & (cols >= 0)
    n = mesh.n_dofs
    raw = csr_from_triplets(n, n, (rows[keep], cols[keep], local[keep]))
    # явная симметризация: (K + Kᵀ) / 2
    return SparseMatrix.from_scipy(0.5 * (raw.csr + raw.csr.T), symmetric=True)


def assemble(mesh: Mesh) -> FemSystem:
    """Собирает M и A (P1, однородные условия Дирихле) и раскладывает A."""
    if mesh.n_dofs == 0:
        raise MeshError("Сетка не содержит внутренних узлов")
    local_mass, local_stiffness = element_matrices(mesh)
    mass = _assemble_interior(mesh, local_mass)
    stiffness = _assemble_interior(mesh, local_stiffness)
    try:
        factor = cholesky_factor(stiffness)
    except NotPositiveDefiniteError as e:
        logging.error(f"❌ Разложение матрицы жёсткости не удалось (вырожденная сетка?): {e}")
        raise
    logging.info(
        f"✅ Система МКЭ собрана: h={mesh.h:g}, {mesh.n_dofs} степеней свободы, "
        f"nnz(A)={stiffness.nnz}, лента {factor.bandwidth}"
    )
    return FemSystem(mesh=mesh, mass=mass, stiffness=stiffness, stiffness_factor=factor)


def _check_mesh(sys: FemSystem, f: NodalFunction) -> None:
    if not sys.mesh.same_as(f.mesh):
        raise MeshError("Узловая функция задана на другой сетке")


def load_vector(sys: FemSystem, f: NodalFunction) -> np.ndarray:
    """b = M·f при узловой интерполяции источника."""
    _check_mesh(sys, f)
    return spmv(sys.mass, f.values)


def m_inner(sys: FemSystem, x, y) -> float:
    """(x, y)_M = xᵀMy."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"m_inner: формы {x.shape} и {y.shape} не совпадают")
    return float(x @ spmv(sys.mass, y))


def m_norm(sys: FemSystem, x) -> float:
    """||x||_M = sqrt(xᵀMx): именно норма, с корнем."""
    return float(np.sqrt(max(m_inner(sys, x, x), 0.0)))


def mass_eigen_bounds(sys: FemSystem, iterations: int = 300, seed: int = 0) -> Tuple[float, float]:
    """
    Оценки (λ_min(M), λ_max(M)): степенной метод для максимума
    и обратные итерации (через разложение M) для минимума.
    Возвращаются отношения Рэлея последних итераций.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(sys.n)
    y = x.copy()
    for _ in range(iterations):
        x = spmv(sys.mass, x)
        x /= np.linalg.norm(x)
        y = cholesky_solve(sys.mass_factor, y)
        y /= np.linalg.norm(y)
    lam_max = float(x @ spmv(sys.mass, x))
    lam_min = float(y @ spmv(sys.mass, y))
    logging.debug(f"Спектр M: λ_min≈{lam_min:.4e}, λ_max≈{lam_max:.4e}")
    return lam_min, lam_max


def norm_equivalence_constants(sys: FemSystem, iterations: int = 300) -> Tuple[float, float]:
    """
    Константы c1 <= ||v||_M / ||v||_n <= c2.

    Из λ_min||v||₂² <= vᵀMv <= λ_max||v||₂² и ||v||_n = n^{-1/2}||v||₂
    следует c = sqrt(λ·n).
    """
    lam_min, lam_max = mass_eigen_bounds(sys, iterations=iterations)
    return float(np.sqrt(lam_min * sys.n)), float(np.sqrt(lam_max * sys.n))
