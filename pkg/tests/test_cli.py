import json
import subprocess
import sys
from pathlib import Path

import pytest

CLI = [sys.executable, "-m", "tripletrack.cli"]

FAST_MODEL = [
    "--set", "model.input=16x16x3",
    "--set", "model.layers=conv:4x3:p1,relu,pool:2,flatten,dense:16",
    "--set", "model.output_dim=16",
    "--set", "trainer.batch_size=8",
    "--set", "trainer.learning_rate=0.001",
    "--set", "miner.buffer_length=5",
    "--set", "tracker.min_track_length=4",
]

SMALL_SYNTH = [
    "--set", "synth.frame_height=48",
    "--set", "synth.frame_width=64",
    "--set", "synth.num_objects=4",
    "--set", "synth.num_frames=30",
    "--set", "synth.sprite_min=8",
    "--set", "synth.sprite_max=12",
    "--set", "synth.occlusion_count=0",
]


def run_cli(*args):
    return subprocess.run(
        CLI + list(args), capture_output=True, text=True, cwd="/root/pkg"
    )


@pytest.fixture(scope="module")
def seq_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("seq")
    res = run_cli("synth", "--out", str(out), "--seed", "5", *SMALL_SYNTH)
    assert res.returncode == 0, res.stderr
    return out


def test_synth_writes_files(seq_dir):
    assert (seq_dir / "det.txt").is_file()
    assert (seq_dir / "gt.txt").is_file()
    assert (seq_dir / "frames.bin").is_file()


def test_synth_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("synth", "--out", str(a), "--seed", "9", *SMALL_SYNTH).returncode == 0
    assert run_cli("synth", "--out", str(b), "--seed", "9", *SMALL_SYNTH).returncode == 0
    assert (a / "det.txt").read_bytes() == (b / "det.txt").read_bytes()
    assert (a / "frames.bin").read_bytes() == (b / "frames.bin").read_bytes()


def test_track_produces_outputs(seq_dir, tmp_path):
    out = tmp_path / "run"
    res = run_cli(
        "track",
        "--det", str(seq_dir / "det.txt"),
        "--frames", str(seq_dir / "frames.bin"),
        "--out", str(out),
        "--seed", "1",
        "--checkpoint-out", str(out / "model.npz"),
        "--triplet-log", str(tmp_path / "triplets.jsonl"),
        *FAST_MODEL,
    )
    assert res.returncode == 0, res.stderr
    assert (out / "tracks.txt").is_file()
    stats = json.loads((out / "stats.json").read_text())
    assert stats["frames"] == 30
    assert stats["wall_time_sec"] is None
    assert stats["mode"] == "online"
    info = json.loads((out / "run_info.json").read_text())
    assert info["wall_time_sec"] > 0
    assert (out / "model.npz").is_file()
    for line in res.stdout.splitlines():
        assert line.startswith("wrote ")


def test_track_frozen_mode(seq_dir, tmp_path):
    out = tmp_path / "frozen"
    res = run_cli(
        "track",
        "--det", str(seq_dir / "det.txt"),
        "--frames", str(seq_dir / "frames.bin"),
        "--out", str(out),
        "--seed", "1",
        "--set", "pipeline.mode=frozen",
        *FAST_MODEL,
    )
    assert res.returncode == 0, res.stderr
    stats = json.loads((out / "stats.json").read_text())
    assert stats["batches_trained"] == 0


def test_track_missing_detection_file(tmp_path):
    res = run_cli(
        "track",
        "--det", str(tmp_path / "nope.txt"),
        "--frames", str(tmp_path / "nope.bin"),
        "--out", str(tmp_path / "out"),
    )
    assert res.returncode == 2
    assert "nope.txt" in res.stderr
    assert not (tmp_path / "out").exists()


def test_track_byte_identical_reruns(seq_dir, tmp_path):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        res = run_cli(
            "track",
            "--det", str(seq_dir / "det.txt"),
            "--frames", str(seq_dir / "frames.bin"),
            "--out", str(out),
            "--seed", "3",
            *FAST_MODEL,
        )
        assert res.returncode == 0, res.stderr
        outs.append(out)
    assert (outs[0] / "tracks.txt").read_bytes() == (outs[1] / "tracks.txt").read_bytes()
    assert (outs[0] / "stats.json").read_bytes() == (outs[1] / "stats.json").read_bytes()


def test_evaluate_gt_against_itself(seq_dir, tmp_path):
    out = tmp_path / "eval"
    res = run_cli(
        "evaluate",
        "--gt", str(seq_dir / "gt.txt"),
        "--hyp", str(seq_dir / "gt.txt"),
        "--out", str(out),
    )
    assert res.returncode == 0, res.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["mota"] == 1.0
    assert report["fp"] == 0 and report["fn"] == 0 and report["ids"] == 0
    csv = (out / "summary.csv").read_text().splitlines()
    assert csv[0] == "mota,motp,ids,fp,fn"


def test_evaluate_empty_hypotheses(seq_dir, tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    out = tmp_path / "eval2"
    res = run_cli(
        "evaluate", "--gt", str(seq_dir / "gt.txt"), "--hyp", str(empty),
        "--out", str(out),
    )
    assert res.returncode == 0, res.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["fp"] == 0 and report["ids"] == 0
    assert report["fn"] == report["gt_total"]
    assert report["mota"] == pytest.approx(0.0)


def test_evaluate_empty_gt_errors(seq_dir, tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    out = tmp_path / "eval3"
    res = run_cli(
        "evaluate", "--gt", str(empty), "--hyp", str(seq_dir / "gt.txt"),
        "--out", str(out),
    )
    assert res.returncode == 1
    report = json.loads((out / "report.json").read_text())
    assert report["error"]
    assert report["fp"] > 0


def test_evaluate_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1,-1,10,20,0,40,0.9,-1,-1,-1\n")
    good = tmp_path / "good.txt"
    good.write_text("1,0,10,20,30,40,1,-1,-1,-1\n")
    res = run_cli(
        "evaluate", "--gt", str(good), "--hyp", str(bad), "--out", str(tmp_path / "o")
    )
    assert res.returncode == 1
    assert "line 1" in res.stderr


def test_ablate_four_modes(seq_dir, tmp_path):
    out = tmp_path / "ablate"
    res = run_cli(
        "ablate", "--sequences", str(seq_dir), "--out", str(out),
        "--seed", "2", *FAST_MODEL,
    )
    assert res.returncode == 0, res.stderr
    lines = (out / "ablation.csv").read_text().splitlines()
    assert lines[0] == "mode,mota,motp,ids,fp,fn,wall_time_sec"
    modes = [line.split(",")[0] for line in lines[1:]]
    assert modes == ["online", "frozen", "easy_positives", "random_negatives"]


def test_ablate_deterministic_table(seq_dir, tmp_path):
    def table(name):
        out = tmp_path / name
        res = run_cli(
            "ablate", "--sequences", str(seq_dir), "--out", str(out),
            "--seed", "2", *FAST_MODEL,
        )
        assert res.returncode == 0, res.stderr
        rows = (out / "ablation.csv").read_text().splitlines()
        return [",".join(r.split(",")[:-1]) for r in rows]  # drop wall time

    assert table("t1") == table("t2")


def test_ablate_requires_sequences():
    res = run_cli("ablate", "--sequences", "--out", "/tmp/x")
    assert res.returncode == 2


def test_gradcheck_passes_small():
    res = run_cli(
        "gradcheck", "--trials", "2", "--samples", "10", "--triplets", "3",
        "--set", "model.input=8x8x3",
        "--set", "model.layers=conv:4x3,relu,pool:2,flatten,dense:8",
        "--set", "model.output_dim=8",
    )
    assert res.returncode == 0, res.stderr + res.stdout
    assert "PASS" in res.stdout


def test_gradcheck_corrupt_fails():
    res = run_cli(
        "gradcheck", "--trials", "1", "--samples", "5", "--triplets", "3",
        "--corrupt",
        "--set", "model.input=8x8x3",
        "--set", "model.layers=conv:4x3,relu,pool:2,flatten,dense:8",
        "--set", "model.output_dim=8",
    )
    assert res.returncode == 1
    assert "FAIL" in res.stdout


def test_config_file_plus_override(tmp_path, seq_dir):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment line\n"
        "model.input = 16x16x3\n"
        "model.layers = conv:4x3:p1,relu,pool:2,flatten,dense:16\n"
        "model.output_dim = 16\n"
        "trainer.batch_size = 8\n"
        "miner.buffer_length = 5\n"
        "pipeline.mode = online\n"
    )
    out = tmp_path / "out"
    res = run_cli(
        "track",
        "--det", str(seq_dir / "det.txt"),
        "--frames", str(seq_dir / "frames.bin"),
        "--out", str(out),
        "--config", str(cfg),
        "--set", "pipeline.mode=frozen",  # override wins
        "--seed", "4",
    )
    assert res.returncode == 0, res.stderr
    stats = json.loads((out / "stats.json").read_text())
    assert stats["mode"] == "frozen"


def test_unknown_config_key_exit_2(seq_dir, tmp_path):
    res = run_cli(
        "track",
        "--det", str(seq_dir / "det.txt"),
        "--frames", str(seq_dir / "frames.bin"),
        "--out", str(tmp_path / "out"),
        "--set", "tracker.warp_speed=9",
    )
    assert res.returncode == 2
    assert not (tmp_path / "out").exists()
