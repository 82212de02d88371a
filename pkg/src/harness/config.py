import json
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator, model_validator

from src.errors import ConfigError, UnknownSourceError
from src.ingestion.sources import DEFAULT_THRESHOLD, SourceSpec

DEFAULT_STEP = 1.0 / 2 ** 8


def _env_seed() -> int:
    raw = os.getenv("LPIS_DEFAULT_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"LPIS_DEFAULT_SEED должен быть целым числом, получено '{raw}'")


def _env_output_dir() -> str:
    return os.getenv("LPIS_OUTPUT_DIR", "./runs")


class SourceModel(BaseModel):
    """Источник в конфигурации; проверки делегируются SourceSpec."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["analytic", "image", "glyphs"]
    name: Optional[str] = None
    path: Optional[str] = None
    text: Optional[str] = None
    threshold: int = Field(default=DEFAULT_THRESHOLD, ge=0, le=255)
    description: str = ""

    @model_validator(mode="after")
    def _check_spec(self):
        self.to_spec()
        return self

    def to_spec(self) -> SourceSpec:
        try:
            return SourceSpec(
                kind=self.kind, name=self.name, path=self.path, text=self.text,
                threshold=self.threshold, description=self.description,
            )
        except UnknownSourceError as e:
            # pydantic собирает только ValueError/AssertionError
            raise ValueError(str(e)) from None


class RunConfig(BaseModel):
    """
    Параметры прогона. Значения по умолчанию соответствуют общей постановке
    экспериментов: h = dt = 1/2⁸, T = 1, λ = 1e-7, tol CG = 1e-8, σ = 1e-3,
    f₀ = sin(πx)sin(πy), ℓ = 10, tol ROM = 1e-14.
    """
    model_config = ConfigDict(extra="forbid")

    lx: float = Field(default=1.0, gt=0)
    ly: float = Field(default=1.0, gt=0)
    h: float = Field(default=DEFAULT_STEP, gt=0)
    dt: float = Field(default=DEFAULT_STEP, gt=0)
    T: float = Field(default=1.0, gt=0)
    engine: Literal["fem", "rom"] = "rom"
    ell: int = Field(default=10, ge=1, le=32)
    rom_tol: float = Field(default=1e-14, gt=0)
    lambda_n: float = Field(default=1e-7, gt=0)
    cg_tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=1000, ge=1)
    sigma: float = Field(default=1e-3, ge=0)
    seed: int = Field(default_factory=_env_seed, ge=0, lt=2 ** 64)
    source: SourceModel = SourceModel(kind="glyphs", text="A", description="буква A")
    initial_guess: SourceModel = SourceModel(kind="analytic", name="sin_pi_x_sin_pi_y")
    output_dir: str = Field(default_factory=_env_output_dir)
    # параметры режима bench
    mesh_sizes: List[float] = Field(default_factory=lambda: [1.0 / 2 ** 5, 1.0 / 2 ** 6])
    repeat: int = Field(default=1, ge=1)
    parallel: bool = False

    _base_dir: str = PrivateAttr(default=".")

    @model_validator(mode="before")
    @classmethod
    def _flatten_domain(cls, data: Any) -> Any:
        if isinstance(data, Mapping) and "domain" in data:
            data = dict(data)
            domain = data.pop("domain")
            if not isinstance(domain, Mapping):
                raise ValueError("domain должен быть объектом {lx, ly}")
            unknown = set(domain) - {"lx", "ly"}
            if unknown:
                raise ValueError(f"domain: неизвестные поля {sorted(unknown)}")
            for key in ("lx", "ly"):
                if key in domain:
                    if key in data:
                        raise ValueError(f"{key} задан и в domain, и на верхнем уровне")
                    data[key] = domain[key]
        return data

    @field_validator("mesh_sizes")
    @classmethod
    def _check_mesh_sizes(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("список mesh_sizes пуст")
        if any(h <= 0 for h in value):
            raise ValueError(f"все шаги должны быть > 0, получено {value}")
        return value

    @property
    def base_dir(self) -> str:
        """Каталог файла конфигурации: от него ищутся относительные пути изображений."""
        return self._base_dir

    def echo(self) -> Dict[str, Any]:
        """Все действующие параметры прогона для config.json."""
        return self.model_dump(mode="json")


@dataclass(frozen=True)
class BenchRow:
    """Строка сравнения CG-FEM и CG-ROM на одной сетке; gain = fem_time_s / rom_time_s."""
    h: float
    dt: float
    fem_time_s: float
    rom_time_s: float
    fem_iterations: float
    rom_iterations: float
    fem_rel_error: float
    rom_rel_error: float

    def __post_init__(self):
        if self.fem_time_s <= 0 or self.rom_time_s <= 0:
            raise ValueError(f"Время должно быть > 0: fem={self.fem_time_s}, rom={self.rom_time_s}")

    @property
    def gain(self) -> float:
        return self.fem_time_s / self.rom_time_s


def _format_validation_error(source: str, error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<корень>"
        lines.append(f"  {location}: {item['msg']}")
    return f"Некорректная конфигурация {source}:\n" + "\n".join(lines)


def build_config(data: Mapping[str, Any], source: str = "<cli>", base_dir: str = ".") -> RunConfig:
    try:
        cfg = RunConfig.model_validate(dict(data))
    except ValidationError as e:
        raise ConfigError(_format_validation_error(source, e)) from None
    cfg._base_dir = base_dir
    return cfg


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Читает JSON-конфигурацию и применяет переопределения из командной строки.

    Приоритет: флаги CLI > файл > переменные окружения (.env) > значения по умолчанию.
    Синтаксические ошибки сообщаются со строкой и столбцом, ошибки проверки: по полям.
    """
    data: Dict[str, Any] = {}
    base_dir = "."
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as file:
                text = file.read()
        except OSError as e:
            raise ConfigError(f"Не удалось прочитать конфигурацию '{path}': {e}") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: строка {e.lineno}, столбец {e.colno}: {e.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: ожидался JSON-объект, получено {type(data).__name__}")
        base_dir = os.path.dirname(os.path.abspath(path))

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return build_config(data, source=path or "<cli>", base_dir=base_dir)
