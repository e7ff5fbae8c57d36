import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ua3dmot.cli import main
from ua3dmot.io import read_detections_u, read_kitti_labels, read_tracks

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def scene(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "-o", str(out), "--seed", "1000", "--samples", "4"]) == 0
    return out


def test_simulate_writes_parseable_files(scene):
    for name in ("gt.txt", "detections.txt", "samples.txt", "sigma_true.jsonl"):
        assert (scene / name).exists()
    assert len(read_kitti_labels(scene / "gt.txt")) == 100
    dets = read_detections_u(scene / "detections.txt")
    assert all(d.covariance is not None for f in dets for d in f)
    sig = [json.loads(line) for line in (scene / "sigma_true.jsonl").read_text().splitlines()]
    assert len(sig) == 10 and np.array(sig[0]["sigma"]).shape == (7, 7)


def test_simulate_repeatable(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "-o", str(tmp_path / d), "--seed", "3"]) == 0
    for name in ("gt.txt", "detections.txt", "sigma_true.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_zero_noise(tmp_path):
    cfg = tmp_path / "quiet.ini"
    cfg.write_text(
        "[scenario]\npos_std_levels = 0\nsize_std_levels = 0\nyaw_std_levels = 0\ndropout = 0\nclutter_rate = 0\n"
    )
    assert main(["simulate", "-c", str(cfg), "-o", str(tmp_path / "q")]) == 0
    gt = read_tracks(tmp_path / "q" / "gt.txt")
    dets = read_detections_u(tmp_path / "q" / "detections.txt")
    for g, d in zip(gt, dets):
        np.testing.assert_allclose([x.box.to_array() for x in g], [x.box.to_array() for x in d], atol=1e-6)


def test_track_and_eval(scene, tmp_path, capsys):
    out = tmp_path / "tracks.txt"
    assert main(["track", str(scene / "detections.txt"), "-o", str(out)]) == 0
    assert out.exists() and "frames" in capsys.readouterr().out
    rec = tmp_path / "rep.jsonl"
    assert main(["eval", str(scene / "gt.txt"), str(out), "-o", str(rec)]) == 0
    rows = [json.loads(line) for line in rec.read_text().splitlines()]
    assert rows[-1]["name"] == "all" and 0 < rows[-1]["mota"] <= 100


def test_track_missing_file(tmp_path, capsys):
    missing = tmp_path / "nope.txt"
    assert main(["track", str(missing), "-o", str(tmp_path / "o.txt")]) == 1
    assert str(missing) in capsys.readouterr().err


def test_track_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 Car 0.5 1 2 3\n")
    assert main(["track", str(bad), "-o", str(tmp_path / "o.txt")]) == 1
    assert "bad.txt:1:" in capsys.readouterr().err


def test_bad_config(scene, tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[noise]\nalpha = lots\n")
    assert main(["track", str(scene / "detections.txt"), "-c", str(cfg), "-o", str(tmp_path / "o.txt")]) == 2
    cfg.write_text("[noise]\nalpha = 0\nbeta = 0\n")
    assert main(["track", str(scene / "detections.txt"), "-c", str(cfg), "-o", str(tmp_path / "o.txt")]) == 2
    cfg.write_text("[mystery]\nx = 1\n")
    assert main(["config", "--check", str(cfg)]) == 2
    assert main(["track", str(scene / "detections.txt"), "-o", str(tmp_path / "o.txt"), "--alpha", "0", "--beta", "0"]) == 2
    assert main(["track", str(scene / "detections.txt"), "-c", str(tmp_path / "none.ini"), "-o", str(tmp_path / "o.txt")]) == 2


def test_unit_weights_match_baseline_config(scene, tmp_path):
    cfg = tmp_path / "unit.ini"
    cfg.write_text("[noise]\nalpha = 1\nbeta = 0\n")
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["track", str(scene / "detections.txt"), "-c", str(cfg), "-o", str(a)]) == 0
    assert main(["track", str(scene / "detections.txt"), "-c", str(CONFIGS / "baseline.ini"), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_track_directory(scene, tmp_path):
    seqs = tmp_path / "seqs"
    seqs.mkdir()
    for name in ("0000", "0001"):
        (seqs / f"{name}.txt").write_bytes((scene / "detections.txt").read_bytes())
    assert main(["track", str(seqs), "-o", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "0000.txt").read_bytes() == (tmp_path / "out" / "0001.txt").read_bytes()


def test_ellipses(scene, tmp_path):
    ell = tmp_path / "e.jsonl"
    assert main(["track", str(scene / "detections.txt"), "-o", str(tmp_path / "t.txt"), "--emit-ellipses", str(ell)]) == 0
    rec = json.loads(ell.read_text().splitlines()[0])
    assert rec["semi_major"] >= rec["semi_minor"] > 0


def test_group_single_file(tmp_path):
    f = tmp_path / "s0.txt"
    f.write_text("0 Car 0.9 0 0 0.75 1.8 4 1.5 0\n0 Car 0.8 10 0 0.75 1.8 4 1.5 0\n")
    out = tmp_path / "fused.txt"
    assert main(["group", str(f), "-o", str(out)]) == 0
    fused = read_detections_u(out)[0]
    assert len(fused) == 2 and all(np.all(d.covariance == 0) for d in fused)


def test_group_identical_files(tmp_path):
    files = []
    for s in range(3):
        f = tmp_path / f"s{s}.txt"
        f.write_text("0 Car 0.9 0 0 0.75 1.8 4 1.5 0\n1 Car 0.9 0.5 0 0.75 1.8 4 1.5 0\n")
        files.append(str(f))
    out = tmp_path / "fused.txt"
    assert main(["group", *files, "-o", str(out)]) == 0
    frames = read_detections_u(out)
    assert [len(f) for f in frames] == [1, 1]
    assert all(np.all(d.covariance == 0) and d.score == pytest.approx(0.9) for f in frames for d in f)


def test_group_then_track(scene, tmp_path):
    fused = tmp_path / "fused.txt"
    assert main(["group", str(scene / "samples.txt"), "-o", str(fused)]) == 0
    dets = read_detections_u(fused)
    assert any(d.covariance is not None and np.any(d.covariance) for f in dets for d in f)
    assert main(["track", str(fused), "-o", str(tmp_path / "t.txt")]) == 0


def test_decode(tmp_path):
    f = tmp_path / "off.txt"
    anchor = "10 -3 -1 1.6 3.9 1.56 0.4"
    f.write_text(f"0 Car 0.8 {anchor} 0 0 0 0 0 0 0 0.01 0.01 0.01 0.01 0.01 0.01 0.01\n")
    out = tmp_path / "d.txt"
    assert main(["decode", str(f), "-o", str(out)]) == 0
    d = read_detections_u(out)[0][0]
    np.testing.assert_allclose(d.box.to_array(), [10, -3, -1, 1.6, 3.9, 1.56, 0.4], atol=1e-12)
    assert d.covariance[0, 0] == pytest.approx(0.01 * (1.6**2 + 3.9**2))
    f.write_text("0 Car 0.8 1 2 3\n")
    assert main(["decode", str(f), "-o", str(out)]) == 1


def test_eval_examples(tmp_path, capsys):
    gt = tmp_path / "gt.txt"
    line = "{t} {i} Car 0 0 -10 -1 -1 -1 -1 1.5 1.8 4.0 0 0 10 0"
    gt.write_text("\n".join(line.format(t=t, i=1) for t in range(3)) + "\n")
    assert main(["eval", str(gt), str(gt)]) == 0
    assert "100.00" in capsys.readouterr().out
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert main(["eval", str(gt), str(empty)]) == 0
    assert " 0.00" in capsys.readouterr().out
    hyp = tmp_path / "hyp.txt"
    hyp.write_text(line.format(t=0, i=7) + "\n" + line.format(t=2, i=8) + "\n")
    rec = tmp_path / "r.jsonl"
    assert main(["eval", str(gt), str(hyp), "-o", str(rec)]) == 0
    assert json.loads(rec.read_text().splitlines()[-1])["mota"] == pytest.approx(33.333333, abs=0.01)


def test_sweep_single_cell_matches_composition(scene, tmp_path):
    rows = tmp_path / "rows.jsonl"
    assert main(["sweep", str(scene / "detections.txt"), str(scene / "gt.txt"), "--alphas", "1", "--betas", "0", "-o", str(rows)]) == 0
    (row,) = [json.loads(line) for line in rows.read_text().splitlines()]
    tracks = tmp_path / "t.txt"
    assert main(["track", str(scene / "detections.txt"), "-o", str(tracks), "--alpha", "1", "--beta", "0"]) == 0
    rep = tmp_path / "r.jsonl"
    assert main(["eval", str(scene / "gt.txt"), str(tracks), "-o", str(rep)]) == 0
    total = json.loads(rep.read_text().splitlines()[-1])
    assert row["mota"] == pytest.approx(total["mota"], abs=1e-6)
    assert row["f1"] == pytest.approx(total["f1"], abs=1e-6)
    assert row["ml"] == pytest.approx(total["ml_pct"], abs=1e-6)


def test_sweep_grid(scene, tmp_path):
    rows = tmp_path / "rows.jsonl"
    args = ["sweep", str(scene / "detections.txt"), str(scene / "gt.txt"), "-c", str(CONFIGS / "headline.ini")]
    assert main(args + ["--alphas", "0.2,0.6,1", "--betas", "0,5", "-o", str(rows)]) == 0
    table = [json.loads(line) for line in rows.read_text().splitlines()]
    assert len(table) == 6
    assert table[0]["beta"] > 0


def test_sweep_workers_agree(scene, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    base = ["sweep", str(scene / "detections.txt"), str(scene / "gt.txt"), "--alphas", "0.6,1", "--betas", "1"]
    assert main(base + ["-o", str(a)]) == 0
    assert main(base + ["-o", str(b), "-j", "2"]) == 0
    assert a.read_text() == b.read_text()


def test_config_dump_round_trip(tmp_path, capsys):
    assert main(["config", "--dump-defaults"]) == 0
    text = capsys.readouterr().out
    assert "[noise]" in text and "alpha = 0.6" in text
    f = tmp_path / "d.ini"
    f.write_text(text)
    assert main(["config", "--check", str(f)]) == 0
    assert main(["config", "--check", str(CONFIGS / "headline.ini")]) == 0


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ua3dmot", "config", "--dump-defaults"], capture_output=True, text=True)
    assert r.returncode == 0 and "[tracker]" in r.stdout
    r = subprocess.run([sys.executable, "-m", "ua3dmot", "track", str(tmp_path / "x.txt"), "-o", "o"], capture_output=True, text=True)
    assert r.returncode == 1 and "x.txt" in r.stderr


def test_sweep_skips_zero_corner(scene, tmp_path, capsys):
    rows = tmp_path / "rows.jsonl"
    args = ["sweep", str(scene / "detections.txt"), str(scene / "gt.txt"), "--alphas", "0,1", "--betas", "0,1"]
    assert main(args + ["-o", str(rows)]) == 0
    assert len(rows.read_text().splitlines()) == 3
    assert "skipping" in capsys.readouterr().err
    assert main(["sweep", str(scene / "detections.txt"), str(scene / "gt.txt"), "--alphas", "-1", "--betas", "1"]) == 2
