import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from src.errors import DimensionMismatchError, NotPositiveDefiniteError, SolverDivergenceError
from src.fem.assembly import FemSystem, m_inner, m_norm
from src.fem.mesh import NodalFunction
from src.inverse.measurements import empirical_norm

ForwardOperator = Callable[[Union[NodalFunction, np.ndarray]], NodalFunction]

DEFAULT_LAMBDA = 1e-7
DEFAULT_CG_TOL = 1e-8
DEFAULT_MAX_ITER = 1000


@dataclass(frozen=True, eq=False)
class InverseConfig:
    """Параметры обратного процесса (значения по умолчанию: из общей постановки экспериментов)."""
    f0: NodalFunction
    lambda_n: float = DEFAULT_LAMBDA
    cg_tol: float = DEFAULT_CG_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not self.lambda_n > 0:
            raise ValueError(f"lambda_n должен быть > 0, получено {self.lambda_n}")
        if not self.cg_tol > 0:
            raise ValueError(f"cg_tol должен быть > 0, получено {self.cg_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter должен быть >= 1, получено {self.max_iter}")


@dataclass(eq=False)
class ReconstructionReport:
    """
    Результат прогона CG: восстановленный источник, история ||p_k||_M,
    время и число прямых решений (2 на подготовку + 2 на каждую итерацию).
    """
    f_rec: NodalFunction
    iterations: int
    residual_history: List[float]
    wall_time: float
    forward_solve_count: int
    converged: bool
    # заполняются только при record=True
    iterates: List[np.ndarray] = field(default_factory=list)
    directions: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)


def cg_reconstruct(
    forward: ForwardOperator,
    m,
    cfg: InverseConfig,
    sys: FemSystem,
    record: bool = False,
) -> ReconstructionReport:
    """
    Метод сопряжённых градиентов для (S*S + λI) f = S*m в M-скалярном произведении.

        u₀ = S f₀;  r₀ = S(m - u₀) - λ f₀;  p₀ = r₀
        пока ||p_k||_M >= tol:
            Ap_k = S(S p_k) + λ p_k
            α = (r_k, r_k)_M / (p_k, Ap_k)_M
            f_{k+1} = f_k + α p_k;  r_{k+1} = r_k - α Ap_k
            β = (r_{k+1}, r_{k+1})_M / (r_k, r_k)_M;  p_{k+1} = r_{k+1} + β p_k

    Прямой оператор (FEM или ROM) обязан быть линейным и самосопряжённым
    в M-скалярном произведении. Возвращается итерация на момент выхода из цикла.
    """
    m = np.asarray(m.values if isinstance(m, NodalFunction) else m, dtype=float)
    if m.shape != (sys.n,):
        raise DimensionMismatchError(f"Длина измерений {m.shape} != числу внутренних узлов {sys.n}")
    lam = cfg.lambda_n
    mesh = sys.mesh
    solves = 0

    def apply(v: np.ndarray) -> np.ndarray:
        nonlocal solves
        solves += 1
        return forward(NodalFunction(values=v, mesh=mesh)).values

    started = time.perf_counter()
    f = cfg.f0.values.copy()
    u0 = apply(f)
    r = apply(m - u0) - lam * f
    p = r.copy()
    rr = m_inner(sys, r, r)
    error = m_norm(sys, p)
    history = [error]
    iterates = [f.copy()] if record else []
    directions = []
    iterations = 0

    while error >= cfg.cg_tol and iterations < cfg.max_iter:
        u = apply(p)
        ap = apply(u) + lam * p
        pap = m_inner(sys, p, ap)
        if not np.isfinite(pap):
            raise SolverDivergenceError(f"CG: NaN/Inf на итерации {iterations + 1}")
        if pap <= 0:
            raise NotPositiveDefiniteError(
                f"CG: (p, Ap)_M = {pap:.3e} <= 0, оператор не положительно определён (λ слишком мал?)"
            )
        if record:
            directions.append((p.copy(), ap.copy()))

        alpha = rr / pap
        f += alpha * p
        r -= alpha * ap
        rr_new = m_inner(sys, r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        error = m_norm(sys, p)
        iterations += 1
        history.append(error)
        if record:
            iterates.append(f.copy())
        if not np.all(np.isfinite(f)):
            raise SolverDivergenceError(f"CG: NaN/Inf в итерации {iterations}")
        logging.debug(f"CG итерация {iterations}: ||p||_M = {error:.3e}")

    wall_time = time.perf_counter() - started
    converged = error < cfg.cg_tol
    if converged:
        logging.info(f"✅ CG сошёлся за {iterations} итераций ({wall_time:.2f} с)")
    else:
        logging.warning(f"⚠️ CG остановлен по max_iter={cfg.max_iter}, ||p||_M = {error:.3e}")

    return ReconstructionReport(
        f_rec=NodalFunction(values=f, mesh=mesh),
        iterations=iterations,
        residual_history=history,
        wall_time=wall_time,
        forward_solve_count=solves,
        converged=converged,
        iterates=iterates,
        directions=directions,
    )


def objective_value(
    forward: ForwardOperator,
    f,
    m,
    lambda_n: float,
    n_sensors: int,
    sys: Optional[FemSystem] = None,
    misfit: str = "empirical",
) -> float:
    """
    J(f) = ½||Sf - m||² + (λ/2)||f||_M².

    misfit="empirical": норма по датчикам ||·||_n (исходная постановка),
    misfit="mass": M-норма; в этой геометрии M-градиент J равен ровно -r из CG.
    """
    sys = sys if sys is not None else getattr(forward, "sys")
    values = np.asarray(f.values if isinstance(f, NodalFunction) else f, dtype=float)
    m = np.asarray(m.values if isinstance(m, NodalFunction) else m, dtype=float)
    if values.shape != (sys.n,) or m.shape != (sys.n,):
        raise DimensionMismatchError(f"objective_value: формы f {values.shape}, m {m.shape}, n={sys.n}")
    if n_sensors != m.size:
        raise DimensionMismatchError(f"n_sensors={n_sensors} != длине измерений {m.size}")

    misfit_vector = forward(NodalFunction(values=values, mesh=sys.mesh)).values - m
    if misfit == "empirical":
        data_term = empirical_norm(misfit_vector) ** 2
    elif misfit == "mass":
        data_term = m_inner(sys, misfit_vector, misfit_vector)
    else:
        raise ValueError(f"Неизвестная норма невязки: {misfit}")
    return 0.5 * data_term + 0.5 * lambda_n * m_inner(sys, values, values)
