"""
Иерархия исключений пакета.

Все ошибки библиотеки наследуются от LpisError, чтобы CLI мог отличать
ожидаемые ошибки (плохой конфиг, вырожденная матрица) от непредвиденных.
"""


class LpisError(Exception):
    """Базовая ошибка решателя обратной задачи источника."""


class DimensionMismatchError(LpisError, ValueError):
    """Размерности векторов/матриц не согласованы."""


class IndexOutOfRangeError(LpisError, IndexError):
    """Индекс триплета выходит за пределы матрицы."""


class NotPositiveDefiniteError(LpisError):
    """Матрица (или оператор) не является положительно определённой."""


class NonSymmetricError(LpisError, ValueError):
    """Ожидалась симметричная матрица."""


class SolverDivergenceError(LpisError):
    """Итерационный процесс выдал NaN/Inf."""


class MeshError(LpisError, ValueError):
    """Некорректные параметры сетки или несовпадение сеток."""


class ZeroLoadVectorError(LpisError, ValueError):
    """Нулевой вектор нагрузки: последовательность Крылова не определена."""


class UnknownSourceError(LpisError, KeyError):
    """Неизвестное имя аналитического источника или символа."""

    def __str__(self):
        # KeyError по умолчанию оборачивает сообщение в кавычки
        return str(self.args[0]) if self.args else ""


class PgmFormatError(LpisError, ValueError):
    """Файл PGM повреждён или не поддерживается."""


class ConfigError(LpisError, ValueError):
    """Ошибка разбора или валидации конфигурации запуска."""
