import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

from src.errors import LpisError
from src.harness.config import load_config
from src.harness.pipeline import run_bench, run_forward, run_invert
from src.utils.helpers import setup_logging

# Загружаем переменные окружения из файла .env
load_dotenv()

COMMANDS = {
    "forward": run_forward,
    "invert": run_invert,
    "bench": run_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Путь к JSON-конфигурации прогона")
    common.add_argument("--engine", choices=["fem", "rom"], help="Прямой решатель: полная модель или ROM")
    common.add_argument("--seed", type=int, help="Зерно генератора шума")
    common.add_argument("--out", dest="output_dir", help="Каталог для результатов")
    common.add_argument("--log-level", help="Уровень логирования (по умолчанию LPIS_LOG_LEVEL или INFO)")

    parser = argparse.ArgumentParser(
        prog="lpis",
        description="Обратная задача об источнике для уравнения теплопроводности: CG-FEM и CG-ROM.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("forward", parents=[common], help="Решить прямую задачу и сохранить u(T)")
    subparsers.add_parser("invert", parents=[common], help="Восстановить источник по зашумлённым данным")
    bench = subparsers.add_parser("bench", parents=[common], help="Сравнить CG-FEM и CG-ROM на нескольких сетках")
    bench.add_argument("--repeat", type=int, help="Число повторов для усреднения времени")
    bench.add_argument(
        "--mesh-sizes", type=int, nargs="+", metavar="N",
        help="Числа ячеек на единицу длины: h = dt = 1/N (например, 32 64 128)",
    )
    bench.add_argument("--parallel", action="store_true", default=None, help="Считать строки одновременно")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    overrides = {"engine": args.engine, "seed": args.seed, "output_dir": args.output_dir}
    if args.command == "bench":
        overrides["repeat"] = args.repeat
        overrides["parallel"] = args.parallel
        if args.mesh_sizes:
            overrides["mesh_sizes"] = [1.0 / n for n in args.mesh_sizes]

    try:
        cfg = load_config(args.config, overrides)
        result = COMMANDS[args.command](cfg)
    except LpisError as e:
        logging.error(f"❌ {e}")
        return 2
    except Exception as e:
        logging.error(f"❌ Непредвиденная ошибка: {e}", exc_info=True)
        return 1

    logging.info(f"✅ Готово: {len(result.files)} файлов в {result.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
