import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.fem.assembly import FemSystem, assemble, m_norm
from src.fem.forward import FemForwardOperator, TimeGrid
from src.fem.mesh import NodalFunction, build_mesh
from src.harness import artifacts
from src.harness.config import BenchRow, RunConfig
from src.ingestion.sources import source_from_spec
from src.inverse.cg import InverseConfig, ReconstructionReport, cg_reconstruct
from src.inverse.measurements import MeasurementSet, empirical_norm, relative_noise_level, simulate_measurements
from src.rom.solver import RomForwardOperator
from src.utils.helpers import Stopwatch


@dataclass
class RunResult:
    """Итог прогона: каталог артефактов, сводка и замеры по этапам."""
    output_dir: str
    summary: Dict[str, Any]
    timings: Dict[str, float]
    files: List[str] = field(default_factory=list)
    report: Optional[ReconstructionReport] = None
    bench_rows: List[BenchRow] = field(default_factory=list)


@dataclass
class _Problem:
    sys: FemSystem
    grid: TimeGrid

    @property
    def mesh(self):
        return self.sys.mesh


def _setup(cfg: RunConfig, watch: Stopwatch, h: Optional[float] = None, dt: Optional[float] = None) -> _Problem:
    with watch.stage("assembly"):
        mesh = build_mesh(cfg.lx, cfg.ly, h or cfg.h)
        sys = assemble(mesh)
    return _Problem(sys=sys, grid=TimeGrid.from_final_time(cfg.T, dt or cfg.dt))


def make_forward(cfg: RunConfig, problem: _Problem, engine: Optional[str] = None):
    """Прямой оператор выбранного движка: FEM или ROM."""
    engine = engine or cfg.engine
    if engine == "fem":
        return FemForwardOperator(problem.sys, problem.grid)
    return RomForwardOperator(problem.sys, problem.grid, ell=cfg.ell, tol=cfg.rom_tol)


def _relative_m_error(sys: FemSystem, approx: np.ndarray, exact: np.ndarray) -> float:
    denominator = m_norm(sys, exact)
    error = m_norm(sys, approx - exact)
    return error / denominator if denominator > 0 else error


def support_jaccard(approx: np.ndarray, exact: np.ndarray, level: float = 0.5) -> float:
    """Индекс Жаккара носителей {f >= level}; два пустых носителя дают 1."""
    a = np.asarray(approx) >= level
    b = np.asarray(exact) >= level
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 1.0


def _write_config_echo(out: str, cfg: RunConfig, files: List[str]) -> None:
    path = os.path.join(out, "config.json")
    artifacts.write_json(path, cfg.echo())
    files.append(path)


def _write_field(out: str, stem: str, problem: _Problem, values: np.ndarray, files: List[str]) -> Dict[str, float]:
    csv_path = os.path.join(out, f"{stem}.csv")
    pgm_path = os.path.join(out, f"{stem}.pgm")
    artifacts.write_field_csv(csv_path, problem.mesh, values)
    vmin, vmax = artifacts.write_heatmap(pgm_path, problem.mesh, values)
    files.extend([csv_path, pgm_path])
    return {"min": vmin, "max": vmax}


def run_forward(cfg: RunConfig) -> RunResult:
    """Прямая задача: источник -> u(T), CSV и тепловая карта PGM."""
    watch = Stopwatch()
    out = artifacts.ensure_dir(cfg.output_dir)
    files: List[str] = []
    problem = _setup(cfg, watch)

    with watch.stage("source"):
        f = source_from_spec(cfg.source.to_spec(), problem.mesh, base_dir=cfg.base_dir)
    forward = make_forward(cfg, problem)
    with watch.stage("forward"):
        u_T = forward(f)

    rank = None
    if isinstance(forward, RomForwardOperator):
        rank = forward.ranks[-1] if forward.ranks else 0

    summary: Dict[str, Any] = {
        "mode": "forward",
        "engine": cfg.engine,
        "n_dofs": problem.sys.n,
        "n_steps": problem.grid.n_steps,
        "final_time": problem.grid.final_time,
        "rank": rank,
        "heatmap": _write_field(out, "u_T", problem, u_T.values, files),
        "wall_time_s": watch.total,
    }
    _write_config_echo(out, cfg, files)
    for name, payload in (("summary.json", summary), ("timings.json", watch.timings)):
        artifacts.write_json(os.path.join(out, name), payload)
        files.append(os.path.join(out, name))
    logging.info(f"✅ Прямая задача ({cfg.engine}) решена за {watch.total:.2f} с, результаты в {out}")
    return RunResult(output_dir=out, summary=summary, timings=watch.timings, files=files)


def _generate_data(cfg: RunConfig, problem: _Problem, watch: Stopwatch):
    """Истинный источник и зашумлённые данные; данные всегда считаются полной моделью."""
    with watch.stage("source"):
        f_true = source_from_spec(cfg.source.to_spec(), problem.mesh, base_dir=cfg.base_dir)
        f0 = source_from_spec(cfg.initial_guess.to_spec(), problem.mesh, base_dir=cfg.base_dir)
    with watch.stage("data"):
        u_T = FemForwardOperator(problem.sys, problem.grid)(f_true)
        measurements = simulate_measurements(u_T, cfg.sigma, cfg.seed)
    return f_true, f0, u_T, measurements


def _reconstruct(
    cfg: RunConfig,
    problem: _Problem,
    f0: NodalFunction,
    measurements: MeasurementSet,
    engine: str,
) -> Tuple[ReconstructionReport, float]:
    """Восстановление и время построения прямого оператора (разложения FEM входят сюда)."""
    started = time.perf_counter()
    forward = make_forward(cfg, problem, engine)
    setup_time = time.perf_counter() - started
    inverse_cfg = InverseConfig(f0=f0, lambda_n=cfg.lambda_n, cg_tol=cfg.cg_tol, max_iter=cfg.max_iter)
    return cg_reconstruct(forward, measurements.values, inverse_cfg, problem.sys), setup_time


def run_invert(cfg: RunConfig) -> RunResult:
    """Обратная задача: данные по FEM, восстановление выбранным движком (CG-FEM или CG-ROM)."""
    watch = Stopwatch()
    out = artifacts.ensure_dir(cfg.output_dir)
    files: List[str] = []
    problem = _setup(cfg, watch)
    f_true, f0, u_T, measurements = _generate_data(cfg, problem, watch)

    with watch.stage("reconstruction"):
        report, setup_time = _reconstruct(cfg, problem, f0, measurements, cfg.engine)
    with watch.stage("metrics"):
        fitted = FemForwardOperator(problem.sys, problem.grid)(report.f_rec)
        rel_error = _relative_m_error(problem.sys, report.f_rec.values, f_true.values)
        misfit = empirical_norm(fitted.values - measurements.values)
        jaccard = support_jaccard(report.f_rec.values, f_true.values)

    heatmaps = {
        "source": _write_field(out, "f_true", problem, f_true.values, files),
        "observation": _write_field(out, "observation", problem, measurements.values, files),
        "reconstruction": _write_field(out, "f_rec", problem, report.f_rec.values, files),
    }
    residual_path = os.path.join(out, "residuals.csv")
    artifacts.write_residual_csv(residual_path, report.residual_history)
    files.append(residual_path)

    summary: Dict[str, Any] = {
        "mode": "invert",
        "engine": cfg.engine,
        "pipeline": f"CG-{cfg.engine.upper()}",
        "n_dofs": problem.sys.n,
        "n_steps": problem.grid.n_steps,
        "iterations": report.iterations,
        "converged": report.converged,
        "forward_solves": report.forward_solve_count,
        "relative_m_error": rel_error,
        "data_misfit": misfit,
        "support_jaccard": jaccard,
        "realized_noise": relative_noise_level(measurements, u_T),
        "heatmaps": heatmaps,
        "operator_setup_s": setup_time,
        "wall_time_s": setup_time + report.wall_time,
    }
    _write_config_echo(out, cfg, files)
    for name, payload in (("summary.json", summary), ("timings.json", watch.timings)):
        artifacts.write_json(os.path.join(out, name), payload)
        files.append(os.path.join(out, name))
    logging.info(
        f"✅ CG-{cfg.engine.upper()}: {report.iterations} итераций, "
        f"относительная ошибка {rel_error:.3e}, невязка {misfit:.3e}"
    )
    return RunResult(output_dir=out, summary=summary, timings=watch.timings, files=files, report=report)


def _bench_row(cfg: RunConfig, h: float, repeat: int) -> BenchRow:
    watch = Stopwatch()
    row_cfg = cfg.model_copy(update={"h": h, "dt": h})
    problem = _setup(row_cfg, watch)
    f_true, f0, _, measurements = _generate_data(row_cfg, problem, watch)

    stats: Dict[str, Dict[str, float]] = {}
    for engine in ("fem", "rom"):
        times, iterations = [], []
        report = None
        for _ in range(repeat):
            report, setup_time = _reconstruct(row_cfg, problem, f0, measurements, engine)
            times.append(setup_time + report.wall_time)
            iterations.append(report.iterations)
        stats[engine] = {
            "time": float(np.mean(times)),
            "iterations": float(np.mean(iterations)),
            "error": _relative_m_error(problem.sys, report.f_rec.values, f_true.values),
        }

    row = BenchRow(
        h=h, dt=h,
        fem_time_s=stats["fem"]["time"], rom_time_s=stats["rom"]["time"],
        fem_iterations=stats["fem"]["iterations"], rom_iterations=stats["rom"]["iterations"],
        fem_rel_error=stats["fem"]["error"], rom_rel_error=stats["rom"]["error"],
    )
    logging.info(
        f"ℹ️ h=dt={h:g}: FEM {row.fem_time_s:.2f} с / {row.fem_iterations:g} ит., "
        f"ROM {row.rom_time_s:.2f} с / {row.rom_iterations:g} ит., выигрыш {row.gain:.2f}"
    )
    return row


def run_bench(
    cfg: RunConfig,
    mesh_sizes: Optional[Sequence[float]] = None,
    repeat: Optional[int] = None,
    parallel: Optional[bool] = None,
) -> RunResult:
    """
    Сравнение CG-FEM и CG-ROM на одних и тех же данных для каждого h = dt.
    Время движка = построение прямого оператора + цикл CG; сборка системы и данные не входят.
    """
    mesh_sizes = list(mesh_sizes if mesh_sizes is not None else cfg.mesh_sizes)
    if not mesh_sizes:
        raise ValueError("run_bench: пустой список шагов сетки")
    repeat = repeat or cfg.repeat
    parallel = cfg.parallel if parallel is None else parallel
    out = artifacts.ensure_dir(cfg.output_dir)

    if parallel:
        logging.warning("⚠️ Параллельный режим: замеры времени идут с конкуренцией за ядра")
        with ThreadPoolExecutor(max_workers=len(mesh_sizes)) as pool:
            rows = list(pool.map(lambda h: _bench_row(cfg, h, repeat), mesh_sizes))
    else:
        rows = [_bench_row(cfg, h, repeat) for h in mesh_sizes]

    files: List[str] = []
    bench_path = os.path.join(out, "bench.csv")
    artifacts.write_bench_csv(bench_path, rows)
    files.append(bench_path)
    _write_config_echo(out, cfg, files)
    summary = {
        "mode": "bench",
        "repeat": repeat,
        "parallel": parallel,
        "gains": {repr(row.h): row.gain for row in rows},
    }
    artifacts.write_json(os.path.join(out, "summary.json"), summary)
    files.append(os.path.join(out, "summary.json"))
    return RunResult(output_dir=out, summary=summary, timings={}, files=files, bench_rows=rows)
