import csv
import json
import logging
import os
from typing import Any, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from src.fem.mesh import Mesh
from src.harness.config import BenchRow
from src.ingestion.pgm import GrayscaleImage, write_pgm

FIELD_HEADER = ["x", "y", "value"]
RESIDUAL_HEADER = ["iteration", "residual_m_norm"]
BENCH_HEADER = ["h", "dt", "fem_time_s", "rom_time_s", "gain", "fem_ite", "rom_ite", "fem_rel_err", "rom_rel_err"]


def _number(value: float) -> str:
    # repr-точность: CSV воспроизводится байт в байт при том же seed
    return repr(float(value))


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_field_csv(path: str, mesh: Mesh, values: Sequence[float]) -> None:
    """Поле во всех узлах сетки (на границе нули): столбцы x,y,value."""
    full = mesh.full_field(values)
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(FIELD_HEADER)
        for (x, y), value in zip(mesh.node_coords, full):
            writer.writerow([_number(x), _number(y), _number(value)])


def heatmap_image(mesh: Mesh, values: Sequence[float]) -> Tuple[GrayscaleImage, float, float]:
    """
    Линейное отображение поля в оттенки серого: min -> 0, max -> 255.
    Пиксель (row, col) = узел (i = col, j = ny - row); постоянное поле даёт нули.
    """
    grid = mesh.grid_field(values)
    vmin, vmax = float(grid.min()), float(grid.max())
    if vmax > vmin:
        pixels = np.rint((grid - vmin) / (vmax - vmin) * 255.0)
    else:
        pixels = np.zeros_like(grid)
    return GrayscaleImage.from_array(pixels.astype(np.uint8)), vmin, vmax


def write_heatmap(path: str, mesh: Mesh, values: Sequence[float]) -> Tuple[float, float]:
    image, vmin, vmax = heatmap_image(mesh, values)
    write_pgm(path, image, binary=True)
    return vmin, vmax


def write_residual_csv(path: str, history: Iterable[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(RESIDUAL_HEADER)
        for k, value in enumerate(history):
            writer.writerow([k, _number(value)])


def write_json(path: str, payload: Mapping[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as file:
        json.dump(payload, file, indent=2, sort_keys=True, ensure_ascii=False)
        file.write("\n")


def bench_csv_row(row: BenchRow) -> List[str]:
    return [
        _number(row.h), _number(row.dt),
        _number(row.fem_time_s), _number(row.rom_time_s), _number(row.gain),
        _number(row.fem_iterations), _number(row.rom_iterations),
        _number(row.fem_rel_error), _number(row.rom_rel_error),
    ]


def write_bench_csv(path: str, rows: Iterable[BenchRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        for row in rows:
            writer.writerow(bench_csv_row(row))
    logging.info(f"✅ Таблица сравнения записана в {path}")
