import logging
import threading
from dataclasses import dataclass
from typing import List, Union

import numpy as np
import scipy.linalg as sla

from src.errors import DimensionMismatchError
from src.fem.assembly import FemSystem, load_vector
from src.fem.forward import TimeGrid, bdf_march
from src.fem.mesh import NodalFunction
from src.rom.basis import DEFAULT_ELL, DEFAULT_TOL, RomBasis, get_matrix_q


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """M_r = QᵀMQ, A_r = QᵀAQ, b_r = Qᵀb."""
    m_r: np.ndarray
    a_r: np.ndarray
    b_r: np.ndarray

    @property
    def r(self) -> int:
        return int(self.b_r.size)


def reduce(sys: FemSystem, basis: RomBasis, b) -> ReducedSystem:
    """Проецирует полную систему на редуцированный базис."""
    b = np.asarray(b, dtype=float)
    q = basis.q
    if q.shape[0] != sys.n or b.shape != (sys.n,):
        raise DimensionMismatchError(
            f"Несовместимые размеры: Q {q.shape}, b {b.shape}, система {sys.n}"
        )
    m_r = q.T @ (sys.mass.csr @ q)
    a_r = q.T @ (sys.stiffness.csr @ q)
    return ReducedSystem(m_r=m_r, a_r=a_r, b_r=q.T @ b)


def _march_reduced(reduced: ReducedSystem, grid: TimeGrid, keep_history: bool):
    dt = grid.dt
    first = sla.cho_factor(reduced.m_r / dt + reduced.a_r)
    rest = sla.cho_factor(1.5 * reduced.m_r / dt + reduced.a_r)
    return bdf_march(
        lambda u: reduced.m_r @ u,
        lambda rhs: sla.cho_solve(first, rhs),
        lambda rhs: sla.cho_solve(rest, rhs),
        reduced.b_r,
        grid,
        keep_history=keep_history,
    )


def rom_forward_solve(
    sys: FemSystem,
    f: NodalFunction,
    grid: TimeGrid,
    ell: int = DEFAULT_ELL,
    tol: float = DEFAULT_TOL,
    keep_history: bool = False,
):
    """
    Быстрый прямой решатель: строит Q, проецирует систему, интегрирует
    r-мерную задачу той же схемой BDF и возвращает Q·u_r^{N_t}.

    Нулевой источник отклоняется (ZeroLoadVectorError): вызывающий код
    должен сам вернуть u(T) = 0. При keep_history=True возвращается пара
    (u(T), все уровни по времени, продолженные на полную сетку).
    """
    b = load_vector(sys, f)
    basis = get_matrix_q(sys, b, ell=ell, tol=tol)
    reduced = reduce(sys, basis, b)
    u_r, history = _march_reduced(reduced, grid, keep_history)
    result = NodalFunction(values=basis.q @ u_r, mesh=sys.mesh)
    if keep_history:
        return result, [NodalFunction(values=basis.q @ level, mesh=sys.mesh) for level in history]
    return result


class RomForwardOperator:
    """
    Прямой оператор S на основе ROM.

    Для каждого нового источника строится свой базис (он зависит от b),
    разложение A берётся из FemSystem. Нулевой источник даёт Sf = 0 без
    построения базиса. Счётчики позволяют проверить стоимость:
    krylov_solves обратных подстановок с множителем A и dense_solves
    плотных решений r x r.
    """

    def __init__(self, sys: FemSystem, grid: TimeGrid, ell: int = DEFAULT_ELL, tol: float = DEFAULT_TOL):
        self.sys = sys
        self.grid = grid
        self.ell = ell
        self.tol = tol
        self.calls = 0
        self.krylov_solves = 0
        self.dense_solves = 0
        self.ranks: List[int] = []
        self._lock = threading.Lock()

    def __call__(self, f: Union[NodalFunction, np.ndarray]) -> NodalFunction:
        if not isinstance(f, NodalFunction):
            f = NodalFunction(values=f, mesh=self.sys.mesh)
        b = load_vector(self.sys, f)
        if not np.any(b):
            with self._lock:
                self.calls += 1
            return NodalFunction(values=np.zeros(self.sys.n), mesh=self.sys.mesh)

        basis = get_matrix_q(self.sys, b, ell=self.ell, tol=self.tol)
        u_r, _ = _march_reduced(reduce(self.sys, basis, b), self.grid, keep_history=False)
        with self._lock:
            self.calls += 1
            self.krylov_solves += basis.krylov_solves
            self.dense_solves += self.grid.n_steps
            self.ranks.append(basis.r)
        logging.debug(f"ROM прогон: r={basis.r}, векторов Крылова {basis.krylov_solves}")
        return NodalFunction(values=basis.q @ u_r, mesh=self.sys.mesh)
