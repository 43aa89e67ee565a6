import json
import shutil

import numpy as np
import pytest

from porevoice.cli import main
from porevoice.volume import load_gray_image, save_gray_image


@pytest.fixture(scope="module")
def stack_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("stack")
    code = main(
        [
            "gen", "--kind", "spheres", "--spheres", "3",
            "--dims", "24", "64", "64", "--seed", "5", "--output", str(out),
        ]
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def corpus_dir(stack_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    code = main(
        ["preprocess", "--input", str(stack_dir), "--output", str(out / "ds"),
         "--mode", "downsample"]
    )
    assert code == 0
    return out / "ds"


class TestGen:
    def test_truth_record_written(self, stack_dir):
        truth = json.loads((stack_dir / "truth.json").read_text())
        assert truth["kind"] == "spheres"
        assert truth["sphere_count"] == 3
        assert 0 < truth["porosity"] < 1
        assert len(list(stack_dir.glob("s*.png"))) == 24

    def test_chain_truth_has_tau(self, tmp_path):
        code = main(
            ["gen", "--kind", "chain", "--shape", "u", "--size", "24",
             "--output", str(tmp_path / "u")]
        )
        assert code == 0
        truth = json.loads((tmp_path / "u" / "truth.json").read_text())
        assert truth["expected_tau"] == pytest.approx(3.0)


class TestPreprocess:
    def test_downsample_corpus(self, corpus_dir):
        names = sorted(p.name for p in corpus_dir.glob("*.png"))
        assert len(names) == 24
        assert names[0] == "s0000.png"
        assert load_gray_image(corpus_dir / "s0000.png").shape == (64, 64)
        manifest = (corpus_dir / "manifest.tsv").read_text().splitlines()
        assert len(manifest) == 24

    def test_tile_corpus_naming(self, stack_dir, tmp_path):
        code = main(
            ["preprocess", "--input", str(stack_dir), "--output", str(tmp_path / "t"),
             "--mode", "tile", "--tile-side", "32"]
        )
        assert code == 0
        names = sorted(p.name for p in (tmp_path / "t").glob("*.png"))
        assert len(names) == 24 * 4
        assert "s0003_r1_c0.png" in names

    def test_collision_requires_overwrite(self, stack_dir, corpus_dir):
        code = main(
            ["preprocess", "--input", str(stack_dir), "--output", str(corpus_dir),
             "--mode", "downsample"]
        )
        assert code == 1
        code = main(
            ["preprocess", "--input", str(stack_dir), "--output", str(corpus_dir),
             "--mode", "downsample", "--overwrite"]
        )
        assert code == 0

    def test_bad_mode_is_usage_error(self, stack_dir, tmp_path):
        code = main(
            ["preprocess", "--input", str(stack_dir), "--output", str(tmp_path / "x"),
             "--mode", "sideways"]
        )
        assert code == 2

    def test_missing_input_is_runtime_error(self, tmp_path):
        code = main(
            ["preprocess", "--input", str(tmp_path / "nope"), "--output",
             str(tmp_path / "out"), "--mode", "downsample"]
        )
        assert code == 1


class TestSonify:
    def test_wavs_mirror_corpus(self, corpus_dir, tmp_path):
        out = tmp_path / "wav"
        code = main(
            ["sonify", "--input", str(corpus_dir), "--output", str(out),
             "--duration", "0.1"]
        )
        assert code == 0
        assert len(list(out.glob("*.wav"))) == 24
        lines = (out / "manifest.tsv").read_text().splitlines()
        assert len(lines) == 24
        image_ref, wav_ref = lines[0].split("\t")
        assert (out / wav_ref).exists()
        assert (out / image_ref).resolve().exists()

    def test_deterministic_bytes_across_runs(self, corpus_dir, tmp_path):
        args = ["sonify", "--input", str(corpus_dir), "--duration", "0.1"]
        main(args + ["--output", str(tmp_path / "a")])
        main(args + ["--output", str(tmp_path / "b")])
        wav_a = (tmp_path / "a" / "s0000.wav").read_bytes()
        wav_b = (tmp_path / "b" / "s0000.wav").read_bytes()
        assert wav_a == wav_b

    def test_pixel_mode(self, corpus_dir, tmp_path):
        code = main(
            ["sonify", "--input", str(corpus_dir), "--output", str(tmp_path / "p"),
             "--duration", "0.1", "--synth-mode", "pixel"]
        )
        assert code == 0
        assert len(list((tmp_path / "p").glob("*.wav"))) == 24


class TestAnalyze:
    def test_2d_outputs(self, corpus_dir, tmp_path):
        out = tmp_path / "a2d"
        assert main(["analyze", "--input", str(corpus_dir), "--output", str(out),
                     "--which", "2d"]) == 0
        for name in ("mean_luminance.csv", "porosity.csv", "pore_size.csv",
                     "luminance_distribution.csv"):
            assert (out / name).exists()
        rows = (out / "porosity.csv").read_text().splitlines()
        assert len(rows) == 25  # header + 24 slices

    def test_3d_sphere_count_matches_truth(self, stack_dir, tmp_path):
        out = tmp_path / "a3d"
        assert main(["analyze", "--input", str(stack_dir), "--output", str(out),
                     "--which", "3d", "--voxel-size", "1.0"]) == 0
        truth = json.loads((stack_dir / "truth.json").read_text())
        rows = (out / "pore_diameters.csv").read_text().splitlines()
        assert len(rows) - 1 == truth["sphere_count"]
        summary = dict(
            line.split(",") for line in (out / "summary_3d.csv").read_text().splitlines()[1:]
        )
        assert int(summary["pore_count"]) == truth["sphere_count"]
        assert float(summary["porosity"]) == pytest.approx(truth["porosity"], abs=0.01)

    def test_3d_straight_chain_tau(self, tmp_path):
        stack = tmp_path / "chain"
        main(["gen", "--kind", "chain", "--shape", "straight", "--size", "36",
              "--output", str(stack)])
        out = tmp_path / "a3d"
        assert main(["analyze", "--input", str(stack), "--output", str(out),
                     "--which", "3d", "--voxel-size", "1.0"]) == 0
        taus = [float(v) for v in (out / "tortuosity_values.csv").read_text().splitlines()[1:]]
        assert taus and all(abs(t - 1.0) < 1e-6 for t in taus)

    @pytest.mark.parametrize("shape,tolerance", [("l", 0.05), ("u", 0.1)])
    def test_3d_bent_chain_tau_matches_truth(self, tmp_path, shape, tolerance):
        stack = tmp_path / f"chain_{shape}"
        main(["gen", "--kind", "chain", "--shape", shape, "--size", "24",
              "--output", str(stack)])
        truth = json.loads((stack / "truth.json").read_text())
        out = tmp_path / f"a3d_{shape}"
        assert main(["analyze", "--input", str(stack), "--output", str(out),
                     "--which", "3d", "--voxel-size", "1.0",
                     "--axis", truth["measure_axis"], "--grid-spacing", "64"]) == 0
        taus = [float(v) for v in (out / "tortuosity_values.csv").read_text().splitlines()[1:]]
        assert taus
        assert all(abs(t - truth["expected_tau"]) <= tolerance for t in taus), taus

    def test_3d_on_tile_corpus_reassembles(self, stack_dir, tmp_path):
        tiles = tmp_path / "tiles"
        main(["preprocess", "--input", str(stack_dir), "--output", str(tiles),
              "--mode", "tile", "--tile-side", "32"])
        out = tmp_path / "a3d"
        assert main(["analyze", "--input", str(tiles), "--output", str(out),
                     "--which", "3d", "--voxel-size", "1.0"]) == 0
        truth = json.loads((stack_dir / "truth.json").read_text())
        summary = dict(
            line.split(",") for line in (out / "summary_3d.csv").read_text().splitlines()[1:]
        )
        assert int(summary["pore_count"]) == truth["sphere_count"]

    def test_3d_label_dump(self, stack_dir, tmp_path):
        out = tmp_path / "a3d"
        dump = tmp_path / "labels"
        assert main(["analyze", "--input", str(stack_dir), "--output", str(out),
                     "--which", "3d", "--voxel-size", "1.0",
                     "--dump-labels", str(dump)]) == 0
        dumped = sorted(dump.glob("s*.png"))
        assert len(dumped) == 24
        per_slice = (out / "porosity_per_slice.csv").read_text().splitlines()
        assert len(per_slice) == 25


class TestWorkerCap:
    def test_threads_env_respected(self, monkeypatch):
        from porevoice.sonify import SonifyError, worker_count

        monkeypatch.setenv("POREVOICE_THREADS", "2")
        assert worker_count() == 2
        monkeypatch.setenv("POREVOICE_THREADS", "junk")
        with pytest.raises(SonifyError):
            worker_count()


class TestCompare:
    def test_self_comparison_zero(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "cmp"
        assert main(["compare", "--input", str(corpus_dir), "--generated",
                     str(corpus_dir), "--output", str(out)]) == 0
        assert "mean MSE 0.0000" in capsys.readouterr().out  # 4-decimal echo
        summary = dict(
            line.split(",") for line in (out / "summary.csv").read_text().splitlines()[1:]
        )
        assert float(summary["mean_mse"]) == 0.0
        assert float(summary["pct_diff_mean_luminance"]) == 0.0

    def test_shifted_generated_matches_closed_form(self, corpus_dir, tmp_path):
        gen = tmp_path / "gen"
        gen.mkdir()
        means = []
        for p in sorted(corpus_dir.glob("*.png")):
            img = load_gray_image(p)
            assert img.max() <= 245  # shift stays unclamped
            shifted = np.clip(img.astype(np.int64) + 10, 0, 255).astype(np.uint8)
            save_gray_image(gen / p.name, shifted)
            means.append(float(img.mean()))
        out = tmp_path / "cmp"
        assert main(["compare", "--input", str(corpus_dir), "--generated", str(gen),
                     "--output", str(out)]) == 0
        summary = dict(
            line.split(",") for line in (out / "summary.csv").read_text().splitlines()[1:]
        )
        # every pixel moved by exactly 10, so the percent difference is the
        # mean of 10/mean_i over slices
        expected = float(np.mean([10.0 / m for m in means])) * 100.0
        assert float(summary["pct_diff_mean_luminance"]) == pytest.approx(
            expected, rel=1e-4
        )
        assert float(summary["mean_mse"]) == pytest.approx((10.0 / 255.0) ** 2)

    def test_missing_keys_listed(self, corpus_dir, tmp_path):
        gen = tmp_path / "gen"
        gen.mkdir()
        kept = sorted(corpus_dir.glob("*.png"))[:12]
        for p in kept:
            shutil.copy(p, gen / p.name)
        out = tmp_path / "cmp"
        code = main(["compare", "--input", str(corpus_dir), "--generated", str(gen),
                     "--output", str(out)])
        assert code == 1

    def test_tile_mode_reassembles_per_slice(self, stack_dir, tmp_path):
        tiles = tmp_path / "tiles"
        main(["preprocess", "--input", str(stack_dir), "--output", str(tiles),
              "--mode", "tile", "--tile-side", "32"])
        out = tmp_path / "cmp"
        assert main(["compare", "--input", str(tiles), "--generated", str(tiles),
                     "--output", str(out)]) == 0
        rows = (out / "mse_per_pair.csv").read_text().splitlines()
        assert len(rows) - 1 == 24  # per-slice aggregation, not per-tile


class TestConfig:
    def test_config_file_supplies_values_flags_win(self, stack_dir, tmp_path):
        cfg = tmp_path / "pipeline.cfg"
        cfg.write_text(
            "mode = tile\n"
            "tile_side = 32\n"
            "# comment line\n"
            "output = {}\n".format(tmp_path / "from_config")
        )
        code = main(["preprocess", "--input", str(stack_dir), "--config", str(cfg)])
        assert code == 0
        assert (tmp_path / "from_config" / "s0000_r0_c0.png").exists()

        code = main(
            ["preprocess", "--input", str(stack_dir), "--config", str(cfg),
             "--mode", "downsample", "--output", str(tmp_path / "flag_wins")]
        )
        assert code == 0
        assert (tmp_path / "flag_wins" / "s0000.png").exists()

    def test_unknown_config_key_is_usage_error(self, stack_dir, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("wibble = 3\n")
        code = main(["preprocess", "--input", str(stack_dir),
                     "--output", str(tmp_path / "x"), "--config", str(cfg)])
        assert code == 2

    def test_missing_required_is_usage_error(self):
        assert main(["preprocess", "--mode", "downsample"]) == 2


class TestSelftest:
    def test_passes_and_is_deterministic(self, capsys):
        assert main(["selftest"]) == 0
        first = capsys.readouterr().out
        assert main(["selftest"]) == 0
        second = capsys.readouterr().out
        assert first == second
        assert "PASS" in first and "FAIL" not in first

    def test_fault_injection_fails_sphere_check(self, monkeypatch, capsys):
        monkeypatch.setenv("POREVOICE_FAULT", "watershed")
        assert main(["selftest"]) == 1
        out = capsys.readouterr().out
        assert "FAIL sphere pack segmentation" in out
