import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from src.errors import PgmFormatError, UnknownSourceError
from src.fem.mesh import Mesh, NodalFunction
from src.ingestion.pgm import GrayscaleImage, load_pgm

DEFAULT_THRESHOLD = 128
BUNDLED_GLYPH_DIR = os.path.normpath(os.path.join(os.path.dirname(__file__), "..", "..", "assets", "glyphs"))

AnalyticFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Реестр аналитических источников: имя -> f(x, y)
ANALYTIC_SOURCES: Dict[str, AnalyticFunction] = {}


def register_analytic_source(name: str):
    def decorator(func: AnalyticFunction) -> AnalyticFunction:
        ANALYTIC_SOURCES[name] = func
        return func
    return decorator


@register_analytic_source("sin_pi_x_sin_pi_y")
def _sin_pi_x_sin_pi_y(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


@register_analytic_source("sin_2pi_x_sin_pi_y")
def _sin_2pi_x_sin_pi_y(x, y):
    return np.sin(2 * np.pi * x) * np.sin(np.pi * y)


@register_analytic_source("zero")
def _zero(x, y):
    return np.zeros_like(x)


@dataclass(frozen=True)
class SourceSpec:
    """
    Описание источника. kind = "analytic" (name), "image" (path, threshold)
    или "glyphs" (text из встроенных букв, threshold).
    """
    kind: str
    name: Optional[str] = None
    path: Optional[str] = None
    text: Optional[str] = None
    threshold: int = DEFAULT_THRESHOLD
    description: str = field(default="")

    def __post_init__(self):
        if self.kind not in ("analytic", "image", "glyphs"):
            raise UnknownSourceError(f"Неизвестный вид источника: {self.kind}")
        if self.kind == "analytic" and self.name not in ANALYTIC_SOURCES:
            raise UnknownSourceError(f"Неизвестный аналитический источник: {self.name}")
        if self.kind == "image" and not self.path:
            raise ValueError("Для источника-изображения нужен path")
        if self.kind == "glyphs" and not self.text:
            raise ValueError("Для источника из букв нужен text")
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"threshold должен лежать в [0, 255], получено {self.threshold}")


def analytic_source(name: str, mesh: Mesh) -> NodalFunction:
    """Узловая интерполяция зарегистрированной функции во внутренних узлах."""
    try:
        func = ANALYTIC_SOURCES[name]
    except KeyError:
        raise UnknownSourceError(
            f"Неизвестный аналитический источник '{name}', доступны: {sorted(ANALYTIC_SOURCES)}"
        ) from None
    coords = mesh.interior_coords
    return NodalFunction(values=func(coords[:, 0], coords[:, 1]), mesh=mesh)


def rasterize_image_source(
    image: GrayscaleImage,
    mesh: Mesh,
    threshold: int = DEFAULT_THRESHOLD,
    dark_is_source: bool = True,
) -> NodalFunction:
    """
    Индикаторный источник по изображению.

    Узел (x, y) берёт ближайший пиксель col = floor(x/lx·W), row = floor((1 - y/ly)·H)
    (строка 0: верх области). Значение 1, если яркость < threshold
    (тёмные штрихи: носитель источника), иначе 0.
    dark_is_source=False инвертирует правило (яркость >= threshold).
    """
    coords = mesh.interior_coords
    cols = np.clip(np.floor(coords[:, 0] / mesh.lx * image.width).astype(np.int64), 0, image.width - 1)
    rows = np.clip(np.floor((1.0 - coords[:, 1] / mesh.ly) * image.height).astype(np.int64), 0, image.height - 1)
    intensity = image.pixels[rows, cols].astype(np.int64)
    support = intensity < threshold if dark_is_source else intensity >= threshold
    return NodalFunction(values=support.astype(float), mesh=mesh)


def compose_glyphs(text: str, glyph_dir: Optional[str] = None) -> GrayscaleImage:
    """Склеивает встроенные буквы слева направо в одно изображение (например, "CMU")."""
    glyph_dir = glyph_dir or os.getenv("LPIS_GLYPH_DIR", BUNDLED_GLYPH_DIR)
    glyphs = []
    for letter in text.upper():
        path = os.path.join(glyph_dir, f"{letter}.pgm")
        if not os.path.exists(path):
            raise UnknownSourceError(f"Нет растра для символа '{letter}' в {glyph_dir}")
        glyphs.append(load_pgm(path))
    if not glyphs:
        raise UnknownSourceError("Пустой текст для источника из букв")
    heights = {g.height for g in glyphs}
    if len(heights) != 1:
        raise PgmFormatError(f"Растры букв разной высоты: {sorted(heights)}")
    return GrayscaleImage.from_array(np.hstack([g.pixels for g in glyphs]))


def source_from_spec(spec: SourceSpec, mesh: Mesh, base_dir: str = ".", glyph_dir: Optional[str] = None) -> NodalFunction:
    """Строит узловой источник по описанию из конфигурации."""
    if spec.kind == "analytic":
        return analytic_source(spec.name, mesh)
    if spec.kind == "image":
        # относительный путь ищется от текущего каталога, затем от base_dir
        path = spec.path
        if not os.path.isabs(path) and not os.path.exists(path):
            path = os.path.join(base_dir, spec.path)
        image = load_pgm(path)
    else:
        image = compose_glyphs(spec.text, glyph_dir)
    source = rasterize_image_source(image, mesh, threshold=spec.threshold)
    logging.info(f"ℹ️ Источник '{spec.description or spec.kind}': носитель {int(source.values.sum())} узлов")
    return source
