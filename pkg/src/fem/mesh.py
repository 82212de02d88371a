import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.errors import DimensionMismatchError, MeshError

# допуск на делимость сторон области шагом сетки
DIVISIBILITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Структурированная триангуляция прямоугольника [0, lx] x [0, ly].

    Узлы нумеруются построчно: node = j*(nx+1) + i, координаты (i*h, j*h).
    interior_map[node]: номер внутренней степени свободы или -1 для граничного узла.
    """
    lx: float
    ly: float
    h: float
    nx: int
    ny: int
    node_coords: np.ndarray
    triangles: np.ndarray
    interior_map: np.ndarray
    interior_nodes: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.node_coords.shape[0])

    @property
    def n_dofs(self) -> int:
        return int(self.interior_nodes.size)

    @property
    def interior_coords(self) -> np.ndarray:
        return self.node_coords[self.interior_nodes]

    def signed_areas(self) -> np.ndarray:
        p0, p1, p2 = (self.node_coords[self.triangles[:, k]] for k in range(3))
        return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))

    def full_field(self, values: Sequence[float]) -> np.ndarray:
        """Значения во всех узлах: внутренние из values, на границе нули."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_dofs,):
            raise DimensionMismatchError(f"Ожидалось {self.n_dofs} значений, получено {values.shape}")
        full = np.zeros(self.n_nodes)
        full[self.interior_nodes] = values
        return full

    def grid_field(self, values: Sequence[float]) -> np.ndarray:
        """Поле узлов в виде массива (ny+1, nx+1); строка 0: верх области (y = ly)."""
        return self.full_field(values).reshape(self.ny + 1, self.nx + 1)[::-1]

    def same_as(self, other: "Mesh") -> bool:
        return other is self or (
            (self.nx, self.ny) == (other.nx, other.ny)
            and np.isclose(self.lx, other.lx)
            and np.isclose(self.ly, other.ly)
        )


@dataclass(frozen=True, eq=False)
class NodalFunction:
    """Узловые значения функции во внутренних узлах (на границе: ноль)."""
    values: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_dofs,):
            raise DimensionMismatchError(
                f"Длина узловой функции {values.shape} != числу внутренних узлов {self.mesh.n_dofs}"
            )
        object.__setattr__(self, "values", values)


def _cells_per_side(length: float, h: float, name: str) -> int:
    count = int(round(length / h))
    if count < 1 or abs(count * h - length) > DIVISIBILITY_TOL * max(1.0, length):
        raise MeshError(f"Шаг h={h} не делит сторону {name}={length}")
    return count


def build_mesh(lx: float, ly: float, h: float) -> Mesh:
    """
    Строит равномерную сетку: каждая ячейка делится диагональю
    из левого нижнего угла в правый верхний на два прямоугольных треугольника.
    """
    if lx <= 0 or ly <= 0 or h <= 0:
        raise MeshError(f"Стороны области и шаг должны быть положительны: lx={lx}, ly={ly}, h={h}")
    nx = _cells_per_side(lx, h, "lx")
    ny = _cells_per_side(ly, h, "ly")

    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    node_coords = np.column_stack([ii.ravel() * h, jj.ravel() * h]).astype(float)

    ci, cj = np.meshgrid(np.arange(nx), np.arange(ny))
    n0 = (cj * (nx + 1) + ci).ravel()
    n1, n2, n3 = n0 + 1, n0 + nx + 2, n0 + nx + 1
    triangles = np.concatenate([np.column_stack([n0, n1, n2]), np.column_stack([n0, n2, n3])]).astype(np.int64)

    is_interior = (ii > 0) & (ii < nx) & (jj > 0) & (jj < ny)
    interior_nodes = np.flatnonzero(is_interior.ravel())
    interior_map = np.full(node_coords.shape[0], -1, dtype=np.int64)
    interior_map[interior_nodes] = np.arange(interior_nodes.size)

    logging.debug(f"Сетка {nx}x{ny}: {node_coords.shape[0]} узлов, {interior_nodes.size} внутренних")
    return Mesh(
        lx=float(lx), ly=float(ly), h=float(h), nx=nx, ny=ny,
        node_coords=node_coords, triangles=triangles,
        interior_map=interior_map, interior_nodes=interior_nodes,
    )
