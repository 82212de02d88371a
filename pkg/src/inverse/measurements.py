import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from src.errors import DimensionMismatchError
from src.fem.mesh import NodalFunction


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """
    Зашумлённые наблюдения m_i = u(x_i, T) + e_i в датчиках.

    Датчики совпадают с внутренними узлами сетки, поэтому m можно
    напрямую подавать в прямой решатель как узловую функцию.
    """
    values: np.ndarray
    sigma: float
    seed: int
    n_sensors: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma должен быть >= 0, получено {self.sigma}")
        if self.values.shape != (self.n_sensors,):
            raise DimensionMismatchError(
                f"Длина измерений {self.values.shape} != числу датчиков {self.n_sensors}"
            )


def noise_generator(seed: int) -> np.random.Generator:
    """Генератор шума: PCG64 с явным зерном, поток фиксирован для данного seed."""
    return np.random.Generator(np.random.PCG64(seed))


def simulate_measurements(u_T: Union[NodalFunction, np.ndarray], sigma: float, seed: int) -> MeasurementSet:
    """Добавляет к значениям u(T) в датчиках i.i.d. гауссов шум N(0, σ²)."""
    if sigma < 0:
        raise ValueError(f"sigma должен быть >= 0, получено {sigma}")
    clean = np.asarray(u_T.values if isinstance(u_T, NodalFunction) else u_T, dtype=float)
    if sigma == 0:
        values = clean.copy()
    else:
        values = clean + sigma * noise_generator(seed).standard_normal(clean.size)

    if sigma > 0 and np.any(clean):
        realized = empirical_norm(values - clean) / empirical_norm(clean)
        logging.info(f"ℹ️ Измерения: σ={sigma:g}, фактический относительный шум {realized:.2%}")
    return MeasurementSet(values=values, sigma=float(sigma), seed=int(seed), n_sensors=clean.size)


def empirical_norm(v) -> float:
    """||v||_n = sqrt((1/n) Σ v_i²) = n^{-1/2}·||v||₂."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise DimensionMismatchError("empirical_norm: пустой вектор")
    return float(np.linalg.norm(v) / np.sqrt(v.size))


def relative_noise_level(measurements: MeasurementSet, clean) -> float:
    """||e||_n / ||u_T||_n: фактический уровень шума для отчёта."""
    clean = np.asarray(clean.values if isinstance(clean, NodalFunction) else clean, dtype=float)
    denominator = empirical_norm(clean)
    if denominator == 0:
        return float("inf") if measurements.sigma > 0 else 0.0
    return empirical_norm(measurements.values - clean) / denominator
