import logging
import os
import time
from contextlib import contextmanager
from typing import Dict, Iterator, Optional

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def setup_logging(level: Optional[str] = None) -> None:
    """Настраивает корневой логгер; уровень берётся из LPIS_LOG_LEVEL, если не задан явно."""
    level_name = (level or os.getenv("LPIS_LOG_LEVEL", "INFO")).upper()
    numeric = logging.getLevelName(level_name)
    if not isinstance(numeric, int):
        logging.warning(f"⚠️ Неизвестный уровень логирования '{level_name}', используется INFO")
        numeric = logging.INFO
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)


class Stopwatch:
    """
    Замер времени по этапам конвейера.

    with watch.stage("assembly"):
        ...
    watch.timings -> {"assembly": 0.12, ...}; повторный этап суммируется.
    """

    def __init__(self):
        self.timings: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - started
            self.timings[name] = self.timings.get(name, 0.0) + elapsed
            logging.debug(f"Этап '{name}': {elapsed:.3f} с")

    @property
    def total(self) -> float:
        return sum(self.timings.values())
