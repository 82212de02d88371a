"""
Независимые эталонные решения для проверки численных модулей.

Только замкнутые формулы: модуль ничего не импортирует из численной части пакета.
"""
import math


def mode_eigenvalue(kx: int, ky: int, lx: float = 1.0, ly: float = 1.0) -> float:
    """μ = π²((kx/lx)² + (ky/ly)²): собственное значение -Δ для sin-моды."""
    return math.pi ** 2 * ((kx / lx) ** 2 + (ky / ly) ** 2)


def spectral_forward(kx: int, ky: int, lx: float = 1.0, ly: float = 1.0, T: float = 1.0) -> float:
    """
    Модальная амплитуда u(·, T) для f = sin(kxπx/lx)·sin(kyπy/ly):
    u' + μu = 1, u(0) = 0  =>  u(T) = (1 - e^{-μT})/μ.
    """
    if kx < 1 or ky < 1:
        raise ValueError(f"Номера мод должны быть >= 1, получено ({kx}, {ky})")
    mu = mode_eigenvalue(kx, ky, lx, ly)
    # (1 - e^{-μT}) / μ через expm1
    return -math.expm1(-mu * T) / mu


def spectral_tikhonov_filter(modal_amplitude_s: float, lambda_n: float, true_amplitude: float = 1.0) -> float:
    """
    Восстановленная амплитуда моды при точных данных m̂ = s·f̂*:
    f̂ = s·m̂/(s² + λ) = s²/(s² + λ)·f̂*.
    """
    if lambda_n <= 0:
        raise ValueError(f"lambda_n должен быть > 0, получено {lambda_n}")
    s2 = modal_amplitude_s * modal_amplitude_s
    return s2 / (s2 + lambda_n) * true_amplitude
