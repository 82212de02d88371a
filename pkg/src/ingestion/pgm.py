import logging
import os
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from src.errors import PgmFormatError

_WHITESPACE = b" \t\r\n\v\f"


@dataclass(frozen=True, eq=False)
class GrayscaleImage:
    """Изображение в оттенках серого: pixels[row, col], строка 0: верх."""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        if pixels.shape != (self.height, self.width) or self.width < 1 or self.height < 1:
            raise PgmFormatError(f"Размер пикселей {pixels.shape} не совпадает с {self.height}x{self.width}")
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def from_array(cls, pixels) -> "GrayscaleImage":
        pixels = np.asarray(pixels)
        if pixels.ndim != 2:
            raise PgmFormatError(f"Ожидался двумерный массив, получено {pixels.shape}")
        return cls(width=pixels.shape[1], height=pixels.shape[0], pixels=np.clip(pixels, 0, 255))


def _next_token(data: bytes, pos: int) -> Tuple[bytes, int]:
    """Следующий токен заголовка; комментарии '#' до конца строки пропускаются."""
    size = len(data)
    while pos < size:
        if data[pos] in _WHITESPACE:
            pos += 1
        elif data[pos:pos + 1] == b"#":
            while pos < size and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < size and data[pos] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PgmFormatError("Неожиданный конец заголовка PGM")
    return data[start:pos], pos


def _header_int(data: bytes, pos: int, name: str) -> Tuple[int, int]:
    token, pos = _next_token(data, pos)
    try:
        value = int(token)
    except ValueError:
        raise PgmFormatError(f"Некорректное поле заголовка {name}: {token!r}")
    return value, pos


def parse_pgm(data: bytes) -> GrayscaleImage:
    """Разбирает содержимое PGM P2 (ASCII) или P5 (двоичный), maxval <= 255."""
    magic, pos = _next_token(data, 0)
    if magic not in (b"P2", b"P5"):
        raise PgmFormatError(f"Неподдерживаемая сигнатура PGM: {magic!r}")
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise PgmFormatError(f"Некорректный размер изображения {width}x{height}")
    if not 1 <= maxval <= 255:
        raise PgmFormatError(f"Неподдерживаемое maxval={maxval} (допустимо 1..255)")

    count = width * height
    if magic == b"P5":
        # после maxval ровно один пробельный символ, затем двоичные данные
        payload = data[pos + 1:pos + 1 + count]
        if len(payload) < count:
            raise PgmFormatError(f"Обрезанные данные P5: ожидалось {count} байт, получено {len(payload)}")
        values = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)
    else:
        tokens: List[int] = []
        while len(tokens) < count:
            try:
                token, pos = _next_token(data, pos)
            except PgmFormatError:
                raise PgmFormatError(f"Обрезанные данные P2: ожидалось {count} значений, получено {len(tokens)}")
            try:
                tokens.append(int(token))
            except ValueError:
                raise PgmFormatError(f"Некорректное значение пикселя: {token!r}")
        values = np.asarray(tokens, dtype=np.int64)

    if values.min() < 0 or values.max() > maxval:
        raise PgmFormatError(f"Значения пикселей вне диапазона 0..{maxval}")
    if maxval != 255:
        values = np.rint(values * (255.0 / maxval)).astype(np.int64)
    return GrayscaleImage(width=width, height=height, pixels=values.reshape(height, width))


def load_pgm(path: Union[str, os.PathLike]) -> GrayscaleImage:
    """Читает файл PGM с диска."""
    try:
        with open(path, "rb") as file:
            data = file.read()
    except OSError as e:
        raise PgmFormatError(f"Не удалось прочитать изображение '{path}': {e}") from e
    image = parse_pgm(data)
    logging.debug(f"Загружено изображение {path}: {image.width}x{image.height}")
    return image


def encode_pgm(image: GrayscaleImage, binary: bool = True) -> bytes:
    header = f"{'P5' if binary else 'P2'}\n{image.width} {image.height}\n255\n".encode("ascii")
    if binary:
        return header + image.pixels.astype(np.uint8).tobytes()
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in image.pixels)
    return header + rows.encode("ascii") + b"\n"


def write_pgm(path: Union[str, os.PathLike], image: GrayscaleImage, binary: bool = True) -> None:
    """Записывает изображение как P5 (по умолчанию) или P2."""
    with open(path, "wb") as file:
        file.write(encode_pgm(image, binary=binary))
    logging.debug(f"Записано изображение {path}")
