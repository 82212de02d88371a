import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from src.errors import SolverDivergenceError
from src.fem.assembly import FemSystem, load_vector
from src.fem.mesh import NodalFunction
from src.linalg.cholesky import CholeskyFactor, cholesky_factor, cholesky_solve
from src.linalg.sparse import linear_combination, spmv

Vector = np.ndarray


@dataclass(frozen=True)
class TimeGrid:
    """Равномерная сетка по времени: n_steps = ceil(T/dt), последний шаг может перескочить T."""
    dt: float
    n_steps: int
    T: float

    def __post_init__(self):
        if self.dt <= 0 or self.T < 0:
            raise ValueError(f"Некорректная сетка по времени: dt={self.dt}, T={self.T}")
        slack = 1e-9 * self.dt
        if not (self.n_steps * self.dt + slack >= self.T > (self.n_steps - 1) * self.dt - slack):
            raise ValueError(f"n_steps={self.n_steps} не согласовано с T={self.T}, dt={self.dt}")

    @classmethod
    def from_final_time(cls, T: float, dt: float) -> "TimeGrid":
        if dt <= 0:
            raise ValueError(f"dt должен быть > 0, получено {dt}")
        # поправка на округление, чтобы T = 32*dt давало ровно 32 шага
        n_steps = max(0, math.ceil(T / dt - 1e-9))
        return cls(dt=float(dt), n_steps=n_steps, T=float(T))

    @property
    def final_time(self) -> float:
        return self.n_steps * self.dt


def bdf_march(
    apply_mass: Callable[[Vector], Vector],
    solve_first: Callable[[Vector], Vector],
    solve_rest: Callable[[Vector], Vector],
    b: Vector,
    grid: TimeGrid,
    keep_history: bool = False,
) -> Tuple[Vector, Optional[List[Vector]]]:
    """
    Общий цикл BDF по времени для M u' + A u = b, u(0) = 0.

    Шаг 1: неявный Эйлер: (M/dt + A)u¹ = b + (M/dt)u⁰.
    Шаги n >= 2: BDF2: (3M/(2dt) + A)uⁿ = b + (M/dt)(2uⁿ⁻¹ - ½uⁿ⁻²).
    Используется и полной моделью (разреженные матрицы), и редуцированной (плотные r x r).
    """
    dt = grid.dt
    u_prev2 = np.zeros_like(b)
    history = [u_prev2.copy()] if keep_history else None
    if grid.n_steps == 0:
        return u_prev2, history

    u_prev = solve_first(b + apply_mass(u_prev2) / dt)
    if keep_history:
        history.append(u_prev)
    for step in range(2, grid.n_steps + 1):
        rhs = b + apply_mass(2.0 * u_prev - 0.5 * u_prev2) / dt
        u_new = solve_rest(rhs)
        if not np.all(np.isfinite(u_new)):
            raise SolverDivergenceError(f"NaN/Inf на шаге по времени {step}")
        u_prev2, u_prev = u_prev, u_new
        if keep_history:
            history.append(u_prev)
    if not np.all(np.isfinite(u_prev)):
        raise SolverDivergenceError("NaN/Inf в решении на последнем шаге")
    return u_prev, history


@lru_cache(maxsize=16)
def _implicit_factors(sys: FemSystem, grid: TimeGrid) -> Tuple[CholeskyFactor, CholeskyFactor]:
    first = cholesky_factor(linear_combination(1.0 / grid.dt, sys.mass, 1.0, sys.stiffness))
    rest = cholesky_factor(linear_combination(1.5 / grid.dt, sys.mass, 1.0, sys.stiffness))
    logging.debug(f"Разложены матрицы неявных шагов для dt={grid.dt:g}")
    return first, rest


class FemForwardOperator:
    """
    Дискретный прямой оператор S: f -> u_h(T) полной модели.

    Поскольку сопряжённое уравнение совпадает с прямым, этот же объект
    служит и как S*. Разложения неявных матриц строятся один раз.
    """

    def __init__(self, sys: FemSystem, grid: TimeGrid):
        self.sys = sys
        self.grid = grid
        self._first, self._rest = _implicit_factors(sys, grid)

    def solve_load(self, b: Vector, keep_history: bool = False) -> Tuple[Vector, Optional[List[Vector]]]:
        return bdf_march(
            lambda u: spmv(self.sys.mass, u),
            lambda rhs: cholesky_solve(self._first, rhs),
            lambda rhs: cholesky_solve(self._rest, rhs),
            np.asarray(b, dtype=float),
            self.grid,
            keep_history=keep_history,
        )

    def __call__(self, f: Union[NodalFunction, Vector]) -> NodalFunction:
        if not isinstance(f, NodalFunction):
            f = NodalFunction(values=f, mesh=self.sys.mesh)
        u_final, _ = self.solve_load(load_vector(self.sys, f))
        return NodalFunction(values=u_final, mesh=self.sys.mesh)


def fem_forward_solve(sys: FemSystem, f: NodalFunction, grid: TimeGrid, keep_history: bool = False):
    """
    Решает полную задачу и возвращает u_h(T) как NodalFunction.
    При keep_history=True возвращает пару (u(T), [u⁰, ..., u^{N_t}]).
    """
    operator = FemForwardOperator(sys, grid)
    u_final, history = operator.solve_load(load_vector(sys, f), keep_history=keep_history)
    result = NodalFunction(values=u_final, mesh=sys.mesh)
    if keep_history:
        return result, [NodalFunction(values=u, mesh=sys.mesh) for u in history]
    return result


def fem_forward_operator(sys: FemSystem, grid: TimeGrid) -> FemForwardOperator:
    """Переиспользуемый оператор S (и S*) полной модели."""
    return FemForwardOperator(sys, grid)
