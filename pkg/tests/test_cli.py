"""Command-line interface: flags, exit codes, files, determinism."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from edr import read_dense, read_netpbm, read_sparse, densify, synth_video, write_netpbm
from edr.cli import main, parse_run_config
from edr.errors import ParseError


@pytest.fixture
def square_frames(tmp_path):
    d = tmp_path / "frames"
    d.mkdir()
    frames = synth_video("moving_square", 24, 20, 10, size=5, velocity=(2, 0), start=(1, 1))
    for i, f in enumerate(frames):
        write_netpbm(d / f"frame_{i:04d}.pgm",
                     np.floor(f.data * 255.0 + 0.5).astype(np.uint8))
    return d


@pytest.fixture
def constant_frames(tmp_path):
    d = tmp_path / "const"
    d.mkdir()
    for i in range(6):
        write_netpbm(d / f"frame_{i:04d}.pgm", np.full((1, 8, 8), 90, np.uint8))
    return d


class TestRunConfig:
    def test_full_document(self):
        cfg = parse_run_config({
            "timescales": [{"alpha": 0.5}, {"tau_half": 3.8, "beta": 2.0, "nu_on": 0.1}],
            "return_mode": "log",
            "threshold_mode": "hard",
            "color_mode": "per_channel",
            "epsilon": 0.01,
        })
        assert cfg.n_timescales == 2
        assert cfg.timescales[1].beta == 2.0
        assert (cfg.return_mode, cfg.threshold_mode) == ("log", "hard")

    def test_tau_half_entry(self):
        cfg = parse_run_config({"timescales": [{"tau_half": 1.0}]})
        assert cfg.timescales[0].alpha == 0.5

    @pytest.mark.parametrize("doc", [
        [],
        {"timescales": []},
        {"timescales": [{}]},
        {"timescales": [{"alpha": 0.5, "tau_half": 1.0}]},
        {"timescales": [{"alpha": 0.5, "frequency": 3}]},
        {"timescales": [{"alpha": 0.5}], "smoothing": True},
    ])
    def test_structural_errors(self, doc):
        with pytest.raises(ParseError):
            parse_run_config(doc)


class TestTransform:
    def test_dense_and_sparse_agree(self, tmp_path, square_frames, capsys):
        dense_path = tmp_path / "out.edrd"
        sparse_path = tmp_path / "out.edrs"
        rc = main(["transform", "--frames", str(square_frames),
                   "--dense", str(dense_path), "--sparse", str(sparse_path)])
        assert rc == 0
        summary = capsys.readouterr().out
        assert "processed 10 frames" in summary
        dense = read_dense(dense_path)
        header, records = read_sparse(sparse_path)
        rebuilt = densify(records, header.width, header.height, header.n_pairs,
                          frame_indices=[f.frame_idx for f in dense])
        assert len(dense) == 10
        for a, b in zip(dense, rebuilt):
            np.testing.assert_array_equal(a.data, b.data)

    def test_constant_input_is_silent(self, tmp_path, constant_frames, capsys):
        sparse_path = tmp_path / "quiet.edrs"
        rc = main(["transform", "--frames", str(constant_frames),
                   "--sparse", str(sparse_path)])
        assert rc == 0
        assert "0 events; density 0" in capsys.readouterr().out
        _, records = read_sparse(sparse_path)
        assert len(records) == 0

    def test_output_flag_required(self, square_frames):
        with pytest.raises(SystemExit) as exc:
            main(["transform", "--frames", str(square_frames)])
        assert exc.value.code == 2

    def test_deterministic_outputs(self, tmp_path, square_frames, capsys):
        a, b = tmp_path / "a.edrd", tmp_path / "b.edrd"
        assert main(["transform", "--frames", str(square_frames), "--dense", str(a)]) == 0
        assert main(["transform", "--frames", str(square_frames), "--dense", str(b)]) == 0
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_threads_do_not_change_file(self, tmp_path, square_frames, capsys):
        a, b = tmp_path / "a.edrd", tmp_path / "b.edrd"
        main(["transform", "--frames", str(square_frames), "--dense", str(a)])
        main(["transform", "--frames", str(square_frames), "--dense", str(b),
              "--threads", "4"])
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_custom_config(self, tmp_path, square_frames, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "timescales": [{"alpha": 0.5}],
            "threshold_mode": "hard",
        }))
        dense_path = tmp_path / "hard.edrd"
        rc = main(["transform", "--frames", str(square_frames),
                   "--config", str(cfg_path), "--dense", str(dense_path)])
        assert rc == 0
        capsys.readouterr()
        frames = read_dense(dense_path)
        assert frames[0].data.shape[0] == 2
        values = np.unique(np.concatenate([f.data.ravel() for f in frames]))
        assert set(values.tolist()) <= {0.0, 1.0}

    def test_invalid_json_exits_3(self, tmp_path, square_frames, capsys):
        cfg_path = tmp_path / "broken.json"
        cfg_path.write_text("{not json")
        rc = main(["transform", "--frames", str(square_frames),
                   "--config", str(cfg_path), "--dense", str(tmp_path / "x.edrd")])
        assert rc == 3
        assert "error:" in capsys.readouterr().err

    def test_unknown_config_key_exits_3(self, tmp_path, square_frames, capsys):
        cfg_path = tmp_path / "extra.json"
        cfg_path.write_text(json.dumps({"timescales": [{"alpha": 0.5}], "gamma": 1}))
        rc = main(["transform", "--frames", str(square_frames),
                   "--config", str(cfg_path), "--dense", str(tmp_path / "x.edrd")])
        assert rc == 3

    def test_alpha_one_exits_4(self, tmp_path, square_frames, capsys):
        cfg_path = tmp_path / "pinned.json"
        cfg_path.write_text(json.dumps({"timescales": [{"alpha": 1.0}]}))
        rc = main(["transform", "--frames", str(square_frames),
                   "--config", str(cfg_path), "--dense", str(tmp_path / "x.edrd")])
        assert rc == 4
        assert "alpha" in capsys.readouterr().err

    def test_missing_config_file_exits_5(self, tmp_path, square_frames, capsys):
        rc = main(["transform", "--frames", str(square_frames),
                   "--config", str(tmp_path / "nope.json"),
                   "--dense", str(tmp_path / "x.edrd")])
        assert rc == 5

    def test_no_matching_frames_exits_3(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        rc = main(["transform", "--frames", str(empty),
                   "--dense", str(tmp_path / "x.edrd")])
        assert rc == 3

    def test_missing_frames_dir_exits_5(self, tmp_path, capsys):
        rc = main(["transform", "--frames", str(tmp_path / "nothing"),
                   "--dense", str(tmp_path / "x.edrd")])
        assert rc == 5

    def test_raw_input(self, tmp_path, capsys):
        raw_path = tmp_path / "video.raw"
        rng = np.random.default_rng(5)
        raw_path.write_bytes(rng.integers(0, 256, size=4 * 6 * 8, dtype=np.uint8).tobytes())
        rc = main(["transform", "--frames", str(raw_path), "--raw",
                   "--width", "8", "--height", "6",
                   "--dense", str(tmp_path / "raw.edrd")])
        assert rc == 0
        assert len(read_dense(tmp_path / "raw.edrd")) == 4

    def test_raw_needs_geometry(self, tmp_path):
        raw_path = tmp_path / "video.raw"
        raw_path.write_bytes(b"\x00" * 64)
        with pytest.raises(SystemExit) as exc:
            main(["transform", "--frames", str(raw_path), "--raw",
                  "--dense", str(tmp_path / "x.edrd")])
        assert exc.value.code == 2

    def test_raw_length_mismatch_exits_3(self, tmp_path, capsys):
        raw_path = tmp_path / "video.raw"
        raw_path.write_bytes(b"\x00" * 65)
        rc = main(["transform", "--frames", str(raw_path), "--raw",
                   "--width", "8", "--height", "8",
                   "--dense", str(tmp_path / "x.edrd")])
        assert rc == 3


class TestRender:
    def test_renders_all_pairs(self, tmp_path, square_frames, capsys):
        dense_path = tmp_path / "ev.edrd"
        main(["transform", "--frames", str(square_frames), "--dense", str(dense_path)])
        out_dir = tmp_path / "imgs"
        rc = main(["render", "--dense", str(dense_path), "--frame", "2",
                   "--out-dir", str(out_dir)])
        assert rc == 0
        capsys.readouterr()
        names = sorted(p.name for p in out_dir.iterdir())
        assert names == ["frame_000002_k0_off.pgm", "frame_000002_k0_on.pgm",
                         "frame_000002_k1_off.pgm", "frame_000002_k1_on.pgm"]

    def test_zero_frame_renders_black(self, tmp_path, constant_frames, capsys):
        dense_path = tmp_path / "quiet.edrd"
        main(["transform", "--frames", str(constant_frames), "--dense", str(dense_path)])
        out_dir = tmp_path / "black"
        rc = main(["render", "--dense", str(dense_path), "--frame", "3",
                   "--timescale", "0", "--out-dir", str(out_dir)])
        assert rc == 0
        capsys.readouterr()
        img = read_netpbm(out_dir / "frame_000003_k0_on.pgm")
        assert not img.any()

    def test_missing_frame_exits_4(self, tmp_path, constant_frames, capsys):
        dense_path = tmp_path / "quiet.edrd"
        main(["transform", "--frames", str(constant_frames), "--dense", str(dense_path)])
        capsys.readouterr()
        rc = main(["render", "--dense", str(dense_path), "--frame", "99",
                   "--out-dir", str(tmp_path / "x")])
        assert rc == 4


class TestTraceStatsDiff:
    def test_trace_csv_output(self, tmp_path, square_frames, capsys):
        out = tmp_path / "trace.csv"
        rc = main(["trace", "--frames", str(square_frames),
                   "--x", "3", "--y", "3", "--out", str(out)])
        assert rc == 0
        assert "traced pixel (3, 3)" in capsys.readouterr().out
        rows = list(csv.DictReader(out.read_text().splitlines()))
        assert len(rows) == 10
        assert "return_0" in rows[0]

    def test_trace_out_of_bounds_exits_4(self, square_frames, capsys):
        rc = main(["trace", "--frames", str(square_frames), "--x", "99", "--y", "0"])
        assert rc == 4

    def test_stats_dense_sparse_equivalence(self, tmp_path, square_frames, capsys):
        dense_path, sparse_path = tmp_path / "s.edrd", tmp_path / "s.edrs"
        main(["transform", "--frames", str(square_frames),
              "--dense", str(dense_path), "--sparse", str(sparse_path)])
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["stats", "--dense", str(dense_path), "--out", str(a)]) == 0
        assert main(["stats", "--sparse", str(sparse_path), "--n-frames", "10",
                     "--out", str(b)]) == 0
        capsys.readouterr()
        assert a.read_text() == b.read_text()

    def test_stats_needs_exactly_one_input(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["stats", "--out", str(tmp_path / "x.csv")])
        assert exc.value.code == 2

    def test_diff_identical_frames_all_zero(self, tmp_path, constant_frames, capsys):
        out = tmp_path / "d.f32"
        rc = main(["diff", "--frames", str(constant_frames),
                   "--baseline", "gray-diff", "--out", str(out)])
        assert rc == 0
        assert "max |v| 0" in capsys.readouterr().out
        planes = np.frombuffer(out.read_bytes(), dtype="<f4")
        assert planes.shape[0] == 6 * 8 * 8  # one plane per input frame
        assert not planes.any()

    def test_diff_log_baseline(self, tmp_path, square_frames, capsys):
        rc = main(["diff", "--frames", str(square_frames), "--baseline", "log-diff"])
        assert rc == 0
        assert "log-diff" in capsys.readouterr().out


class TestBenchSynth:
    def test_bench_csv(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        rc = main(["bench", "--repr", "GrayDiff", "--width", "48", "--height", "32",
                   "--n-frames", "125", "--out", str(out)])
        assert rc == 0
        assert "fps" in capsys.readouterr().out
        header, row = out.read_text().strip().split("\n")
        assert header == "repr,width,height,threads,frames,seconds,fps"
        assert row.startswith("GrayDiff,48,32,1,105,")

    def test_bench_too_few_frames_exits_4(self, capsys):
        rc = main(["bench", "--repr", "EDR", "--width", "32", "--height", "32",
                   "--n-frames", "50"])
        assert rc == 4

    def test_synth_writes_frames(self, tmp_path, capsys):
        out_dir = tmp_path / "vid"
        rc = main(["synth", "--pattern", "impulse", "--width", "8", "--height", "6",
                   "--n-frames", "7", "--out-dir", str(out_dir)])
        assert rc == 0
        capsys.readouterr()
        files = sorted(out_dir.iterdir())
        assert len(files) == 7
        img = read_netpbm(files[0])
        assert img.shape == (1, 6, 8)

    def test_synth_params_json(self, tmp_path, capsys):
        out_dir = tmp_path / "vid"
        rc = main(["synth", "--pattern", "moving-square", "--width", "16", "--height", "16",
                   "--n-frames", "3", "--params", '{"size": 4, "velocity": [2, 1]}',
                   "--out-dir", str(out_dir)])
        assert rc == 0
        capsys.readouterr()

    def test_synth_bad_params_json_exits_3(self, tmp_path, capsys):
        rc = main(["synth", "--pattern", "constant", "--width", "8", "--height", "8",
                   "--n-frames", "3", "--params", "{bad", "--out-dir", str(tmp_path / "v")])
        assert rc == 3

    def test_synth_unknown_param_exits_4(self, tmp_path, capsys):
        rc = main(["synth", "--pattern", "constant", "--width", "8", "--height", "8",
                   "--n-frames", "3", "--params", '{"speed": 3}',
                   "--out-dir", str(tmp_path / "v")])
        assert rc == 4

    def test_unknown_pattern_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--pattern", "zoom", "--width", "8", "--height", "8",
                  "--n-frames", "3", "--out-dir", str(tmp_path / "v")])
        assert exc.value.code == 2


class TestEntryPoint:
    def test_console_script_help(self):
        out = subprocess.run([sys.executable, "-m", "edr.cli", "--help"],
                             capture_output=True, text=True)
        assert out.returncode == 0
        for sub in ("transform", "render", "trace", "stats", "bench", "diff", "synth"):
            assert sub in out.stdout

    def test_subcommand_help(self):
        out = subprocess.run([sys.executable, "-m", "edr.cli", "transform", "--help"],
                             capture_output=True, text=True)
        assert out.returncode == 0
        assert "--dense" in out.stdout

    def test_version_flag(self):
        out = subprocess.run([sys.executable, "-m", "edr.cli", "--version"],
                             capture_output=True, text=True)
        assert out.returncode == 0
        assert out.stdout.strip()

    def test_missing_subcommand_exits_2(self):
        out = subprocess.run([sys.executable, "-m", "edr.cli"],
                             capture_output=True, text=True)
        assert out.returncode == 2
