from functools import lru_cache

import numpy as np
import pytest

from src.fem.assembly import assemble
from src.fem.forward import TimeGrid
from src.fem.mesh import build_mesh


@lru_cache(maxsize=None)
def cached_system(n: int, lx: float = 1.0, ly: float = 1.0):
    """Собранная система МКЭ для h = 1/n, одна на весь прогон тестов."""
    return assemble(build_mesh(lx, ly, 1.0 / n))


@pytest.fixture
def sys8():
    return cached_system(8)


@pytest.fixture
def sys32():
    return cached_system(32)


@pytest.fixture
def sys64():
    return cached_system(64)


@pytest.fixture
def grid32():
    return TimeGrid.from_final_time(1.0, 1.0 / 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def letter_a_pgm(tmp_path):
    """Маленькая буква-образец в формате P2 (тёмные штрихи на белом)."""
    rows = [
        "........",
        "...##...",
        "..#..#..",
        "..#..#..",
        "..####..",
        ".#....#.",
        ".#....#.",
        "........",
    ]
    body = "\n".join(" ".join("0" if ch == "#" else "255" for ch in row) for row in rows)
    path = tmp_path / "letter.pgm"
    path.write_text(f"P2\n8 8\n255\n{body}\n")
    return path


@pytest.fixture
def make_system():
    return cached_system
