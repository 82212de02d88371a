import csv
import json

import numpy as np
import pytest

from main import main
from src.errors import ConfigError
from src.fem.mesh import build_mesh
from src.harness.artifacts import BENCH_HEADER, heatmap_image
from src.harness.config import BenchRow, build_config, load_config
from src.harness.pipeline import run_bench, run_forward, run_invert, support_jaccard
from src.ingestion.pgm import GrayscaleImage, load_pgm, write_pgm
from src.ingestion.sources import rasterize_image_source

SIN = {"kind": "analytic", "name": "sin_pi_x_sin_pi_y"}


def small_config(tmp_path, **overrides):
    data = {"h": 1.0 / 32, "dt": 1.0 / 32, "output_dir": str(tmp_path / "run"), "source": SIN}
    data.update(overrides)
    return build_config(data)


def read_rows(path):
    with open(path, newline="") as file:
        return list(csv.reader(file))


class TestConfig:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("LPIS_DEFAULT_SEED", raising=False)
        cfg = build_config({})
        assert cfg.h == cfg.dt == 1.0 / 256
        assert (cfg.T, cfg.lambda_n, cfg.cg_tol, cfg.sigma) == (1.0, 1e-7, 1e-8, 1e-3)
        assert (cfg.ell, cfg.rom_tol, cfg.seed) == (10, 1e-14, 0)
        assert cfg.initial_guess.name == "sin_pi_x_sin_pi_y"

    def test_domain_object(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"domain": {"lx": 3.0, "ly": 1.0}, "h": 0.25}))
        cfg = load_config(str(path))
        assert (cfg.lx, cfg.ly) == (3.0, 1.0)

    def test_syntax_error_reports_position(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{\n  "h": 0.5,\n  "dt": ,\n}')
        with pytest.raises(ConfigError, match="строка 3"):
            load_config(str(path))

    def test_field_errors_listed(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"h": -1.0, "engine": "spectral"}))
        with pytest.raises(ConfigError) as error:
            load_config(str(path))
        assert "h:" in str(error.value)
        assert "engine:" in str(error.value)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="lamda"):
            build_config({"lamda": 1e-7})

    def test_unknown_source_rejected(self):
        with pytest.raises(ConfigError, match="source"):
            build_config({"source": {"kind": "analytic", "name": "gauss"}})

    def test_precedence(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LPIS_DEFAULT_SEED", "11")
        monkeypatch.setenv("LPIS_OUTPUT_DIR", "from-env")
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"seed": 5, "engine": "fem"}))
        cfg = load_config(str(path), {"seed": 9, "engine": None})
        assert cfg.seed == 9
        assert cfg.engine == "fem"
        assert cfg.output_dir == "from-env"
        assert load_config(None).seed == 11

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.json"))

    def test_bench_row_gain(self):
        row = BenchRow(h=0.1, dt=0.1, fem_time_s=2.0, rom_time_s=0.5, fem_iterations=3,
                       rom_iterations=5, fem_rel_error=0.1, rom_rel_error=0.2)
        assert row.gain == 4.0
        with pytest.raises(ValueError):
            BenchRow(h=0.1, dt=0.1, fem_time_s=0.0, rom_time_s=1.0, fem_iterations=1,
                     rom_iterations=1, fem_rel_error=0.0, rom_rel_error=0.0)


class TestRunForward:
    def test_fem_heatmap_peak_at_center(self, tmp_path):
        result = run_forward(small_config(tmp_path, engine="fem"))
        image = load_pgm(f"{result.output_dir}/u_T.pgm")
        assert image.pixels[16, 16] == 255
        assert np.count_nonzero(image.pixels == 255) == 1
        assert result.summary["n_steps"] == 32
        assert result.summary["rank"] is None

    def test_field_csv_schema(self, tmp_path):
        result = run_forward(small_config(tmp_path, engine="fem"))
        rows = read_rows(f"{result.output_dir}/u_T.csv")
        assert rows[0] == ["x", "y", "value"]
        assert len(rows) == 1 + 33 * 33

    def test_rom_matches_fem_heatmap(self, tmp_path):
        fem = run_forward(small_config(tmp_path, engine="fem", output_dir=str(tmp_path / "fem")))
        rom = run_forward(small_config(tmp_path, engine="rom", output_dir=str(tmp_path / "rom")))
        fem_pixels = load_pgm(f"{fem.output_dir}/u_T.pgm").pixels.astype(int)
        rom_pixels = load_pgm(f"{rom.output_dir}/u_T.pgm").pixels.astype(int)
        assert np.abs(fem_pixels - rom_pixels).max() <= 1
        assert rom.summary["rank"] >= 1

    def test_white_image_gives_zero_field(self, tmp_path):
        white = tmp_path / "white.pgm"
        write_pgm(white, GrayscaleImage.from_array(np.full((8, 8), 255)))
        result = run_forward(small_config(tmp_path, source={"kind": "image", "path": str(white)}))
        values = [float(row[2]) for row in read_rows(f"{result.output_dir}/u_T.csv")[1:]]
        assert all(value == 0.0 for value in values)

    def test_deterministic_outputs(self, tmp_path):
        first = run_forward(small_config(tmp_path, output_dir=str(tmp_path / "a")))
        second = run_forward(small_config(tmp_path, output_dir=str(tmp_path / "b")))
        for name in ("u_T.csv", "u_T.pgm"):
            with open(f"{first.output_dir}/{name}", "rb") as a, open(f"{second.output_dir}/{name}", "rb") as b:
                assert a.read() == b.read()

    def test_config_echo(self, tmp_path):
        result = run_forward(small_config(tmp_path))
        with open(f"{result.output_dir}/config.json") as file:
            echo = json.load(file)
        assert echo["h"] == 1.0 / 32
        assert echo["source"]["name"] == "sin_pi_x_sin_pi_y"
        assert {"lambda_n", "cg_tol", "sigma", "seed", "ell", "rom_tol", "initial_guess"} <= set(echo)


class TestHeatmap:
    def test_rasterizing_heatmap_recovers_indicator(self, letter_a_pgm):
        mesh = build_mesh(1.0, 1.0, 1.0 / 32)
        indicator = rasterize_image_source(load_pgm(letter_a_pgm), mesh)
        image, vmin, vmax = heatmap_image(mesh, indicator.values)
        assert (vmin, vmax) == (0.0, 1.0)
        recovered = rasterize_image_source(image, mesh, threshold=128, dark_is_source=False)
        np.testing.assert_array_equal(recovered.values, indicator.values)

    def test_constant_field(self):
        mesh = build_mesh(1.0, 1.0, 0.25)
        image, _, _ = heatmap_image(mesh, np.zeros(mesh.n_dofs))
        assert image.pixels.max() == 0


class TestSupportJaccard:
    def test_identical_supports(self):
        f = np.array([0.0, 1.0, 1.0, 0.2])
        assert support_jaccard(f, f) == 1.0

    def test_partial_overlap(self):
        approx = np.array([0.9, 0.6, 0.1, 0.0])
        exact = np.array([1.0, 0.0, 1.0, 0.0])
        assert support_jaccard(approx, exact) == pytest.approx(1.0 / 3.0)

    def test_empty_supports(self):
        assert support_jaccard(np.zeros(3), np.full(3, 0.4)) == 1.0


class TestRunInvert:
    def test_consistent_data(self, tmp_path):
        cfg = small_config(tmp_path, engine="fem", sigma=0.0, lambda_n=1e-12, initial_guess=SIN)
        result = run_invert(cfg)
        assert result.summary["relative_m_error"] <= 1e-6
        assert result.summary["iterations"] <= 2
        assert 0 < result.summary["operator_setup_s"] <= result.summary["wall_time_s"]
        for name in ("f_true.pgm", "observation.csv", "f_rec.csv", "f_rec.pgm", "residuals.csv", "timings.json"):
            assert (tmp_path / "run" / name).exists()
        assert read_rows(tmp_path / "run" / "residuals.csv")[0] == ["iteration", "residual_m_norm"]

    def test_noise_level_reported(self, tmp_path):
        cfg = small_config(
            tmp_path, engine="fem", sigma=1e-3, seed=3,
            source={"kind": "analytic", "name": "sin_2pi_x_sin_pi_y"},
        )
        result = run_invert(cfg)
        assert result.summary["realized_noise"] > 0
        assert result.summary["data_misfit"] < 10 * 1e-3

    def test_same_seed_same_files(self, tmp_path):
        for name in ("a", "b"):
            run_invert(small_config(tmp_path, h=0.125, dt=0.125, seed=7, output_dir=str(tmp_path / name)))
        for name in ("observation.csv", "f_rec.csv", "residuals.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    @pytest.mark.slow
    def test_letter_reconstruction_both_engines(self, tmp_path):
        for engine in ("fem", "rom"):
            cfg = build_config({
                "h": 1.0 / 64, "dt": 1.0 / 64, "engine": engine, "sigma": 1e-3, "seed": 0,
                "source": {"kind": "glyphs", "text": "A"},
                "output_dir": str(tmp_path / engine),
            })
            result = run_invert(cfg)
            assert result.report.converged
            assert result.summary["data_misfit"] < 10 * cfg.sigma
            assert result.summary["support_jaccard"] >= 0.5


class TestRunBench:
    def test_rows_and_schema(self, tmp_path):
        cfg = build_config({
            "mesh_sizes": [1.0 / 8, 1.0 / 16], "sigma": 1e-3,
            "source": {"kind": "glyphs", "text": "A"},
            "output_dir": str(tmp_path / "bench"),
        })
        result = run_bench(cfg)
        assert [row.h for row in result.bench_rows] == [1.0 / 8, 1.0 / 16]
        assert all(row.gain > 0 for row in result.bench_rows)
        rows = read_rows(tmp_path / "bench" / "bench.csv")
        assert rows[0] == BENCH_HEADER
        assert len(rows) == 3

    def test_parallel_matches_sequential_iterations(self, tmp_path):
        cfg = build_config({
            "mesh_sizes": [1.0 / 8], "source": {"kind": "glyphs", "text": "A"},
            "output_dir": str(tmp_path / "bench"),
        })
        sequential = run_bench(cfg).bench_rows[0]
        parallel = run_bench(cfg, parallel=True).bench_rows[0]
        assert sequential.fem_iterations == parallel.fem_iterations
        assert sequential.rom_iterations == parallel.rom_iterations

    @pytest.mark.slow
    def test_gain_grows_with_refinement(self, tmp_path):
        cfg = build_config({
            "mesh_sizes": [1.0 / 32, 1.0 / 64], "source": {"kind": "glyphs", "text": "A"},
            "output_dir": str(tmp_path / "bench"),
        })
        coarse, fine = run_bench(cfg).bench_rows
        # абсолютные времена зависят от машины, порог выигрыша мягкий
        assert fine.gain >= 2.0
        assert fine.gain >= coarse.gain


class TestCli:
    def test_forward_command(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"h": 0.125, "dt": 0.125, "source": SIN}))
        assert main(["forward", "--config", str(path), "--engine", "fem", "--out", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "u_T.csv").exists()

    def test_bad_config_exit_code(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"h": }')
        assert main(["forward", "--config", str(path), "--out", str(tmp_path / "out")]) == 2

    def test_non_dividing_step_exit_code(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"h": 0.3, "source": SIN}))
        assert main(["forward", "--config", str(path), "--out", str(tmp_path / "out")]) == 2
