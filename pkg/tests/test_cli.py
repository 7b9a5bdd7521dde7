import json
import subprocess
import sys

import numpy as np
import pytest

from paflc.cli import main
from paflc.io_formats import read_labelset

from _helpers import FIXTURES

CORRUPT = '{"protrusion": true, "occlusion_rate": 0.5, "miss_rate": 0.1, "drop_mask_rate": 0.5}'


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def pipeline(capsys, root, seed=7, workers=1):
    """synth -> generate -> correct -> parse -> eval -> render -> loss; returns stdout per step."""
    outs = {}
    common = ["--seed", seed, "--workers", workers]
    steps = {
        "synth": ["synth", "--n-scenes", 6, "--persons", "1-3", "--corrupt", CORRUPT, "--out", root / "s",
                  "--width", 560, "--height", 560],
        "generate": ["generate", "--annotations", root / "s" / "gt_corrupted.json", "--out", root / "lab"],
        "correct": ["correct", "--gt", root / "lab", "--teacher", root / "s" / "teacher", "--out", root / "fix"],
        "parse": ["parse", "--labels", root / "fix", "--out", root / "res.json"],
        "eval": ["eval", "--preds", root / "res.json", "--gt", root / "s" / "gt_clean.json",
                 "--report", root / "report.json"],
        "render": ["render", "--labels", root / "fix", "--out", root / "img"],
        "render_preds": ["render", "--preds", root / "res.json", "--gt", root / "s" / "gt_clean.json",
                         "--out", root / "img"],
        "loss": ["loss", "--pred", root / "fix", "--target", root / "lab", "--teacher", root / "s" / "teacher",
                 "--mode", "kd_lc", "--lambda", 0.5],
    }
    for name, argv in steps.items():
        code, out, err = run(capsys, *argv, *common)
        assert code == 0, (name, err)
        outs[name] = out.replace(str(root), "<root>")
    return outs


def test_every_subcommand_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    out_a = pipeline(capsys, a)
    out_b = pipeline(capsys, b)
    assert out_a == out_b
    assert tree_bytes(a) == tree_bytes(b)
    c = tmp_path / "c"
    c.mkdir()
    pipeline(capsys, c, workers=3)
    assert tree_bytes(a) == tree_bytes(c)
    d = tmp_path / "d"
    d.mkdir()
    pipeline(capsys, d, seed=8)
    assert tree_bytes(a) != tree_bytes(d)


def test_synth_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "synth", "--n-scenes", 3, "--persons", 2, "--out", tmp_path, "--seed", 1)
    assert code == 0 and out.startswith("scenes=3 persons=6")
    assert sorted(p.name for p in (tmp_path / "teacher").iterdir()) == ["0.plf", "1.plf", "2.plf"]
    assert json.loads((tmp_path / "ledger.json").read_text()) == {"0": [], "1": [], "2": []}
    assert (tmp_path / "gt_clean.json").read_bytes() == (tmp_path / "gt_corrupted.json").read_bytes()


def test_generate_fixture(capsys, tmp_path):
    code, out, _ = run(capsys, "generate", "--annotations", FIXTURES / "annotations" / "two_images_crowd.json",
                       "--out", tmp_path)
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["1.plf", "2.plf"]
    assert "skipped_limbs=0" in out
    labels = read_labelset(tmp_path / "2.plf")
    assert np.count_nonzero(labels.mask == 0) == 4


def test_generate_counts_skipped_limbs(capsys, tmp_path):
    code, out, _ = run(capsys, "generate", "--annotations", FIXTURES / "annotations" / "protrusion.json",
                       "--out", tmp_path)
    assert code == 0
    skipped = int(out.split("skipped_limbs=")[1].split()[0])
    assert skipped > 0


def test_generate_flags_override_config(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"labelgen": {"stride": 4.0}}))
    run(capsys, "generate", "--annotations", FIXTURES / "annotations" / "empty.json", "--out", tmp_path / "a",
        "--config", cfg)
    assert read_labelset(tmp_path / "a" / "3.plf").grid.stride == 4.0
    run(capsys, "generate", "--annotations", FIXTURES / "annotations" / "empty.json", "--out", tmp_path / "b",
        "--config", cfg, "--stride", 16)
    assert read_labelset(tmp_path / "b" / "3.plf").grid.shape == (15, 20)


def test_bad_config_is_a_usage_error(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"labelgen": {"stripe": 4.0}}))
    code, out, err = run(capsys, "generate", "--annotations", FIXTURES / "annotations" / "empty.json",
                         "--out", tmp_path, "--config", cfg)
    assert code == 2 and out == "" and "stripe" in err


def test_missing_input_fails_cleanly(capsys, tmp_path):
    code, out, err = run(capsys, "generate", "--annotations", tmp_path / "nope.json", "--out", tmp_path / "o")
    assert code == 1 and out == "" and "nope.json" in err


def test_correct_with_itself_changes_nothing(capsys, tmp_path):
    run(capsys, "generate", "--annotations", FIXTURES / "annotations" / "two_images_crowd.json", "--out", tmp_path / "g")
    code, out, _ = run(capsys, "correct", "--gt", tmp_path / "g", "--teacher", tmp_path / "g", "--out", tmp_path / "c")
    assert code == 0
    stats = json.loads((tmp_path / "c" / "stats.json").read_text())
    assert all(s["cells_changed"] == 0 for s in stats.values())
    assert (tmp_path / "c" / "1.plf").read_bytes() == (tmp_path / "g" / "1.plf").read_bytes()


def test_correct_scope_pafs_keeps_maps(capsys, tmp_path):
    run(capsys, "synth", "--n-scenes", 2, "--corrupt", CORRUPT, "--out", tmp_path / "s", "--seed", 3)
    run(capsys, "generate", "--annotations", tmp_path / "s" / "gt_corrupted.json", "--out", tmp_path / "g")
    code, _, _ = run(capsys, "correct", "--gt", tmp_path / "g", "--teacher", tmp_path / "s" / "teacher",
                     "--out", tmp_path / "c", "--scope", "pafs")
    assert code == 0
    for name in ("0.plf", "1.plf"):
        gt, fixed = read_labelset(tmp_path / "g" / name), read_labelset(tmp_path / "c" / name)
        assert fixed.maps.tobytes() == gt.maps.tobytes()


def test_oracle_correction_recovers_clean_labels(capsys, tmp_path):
    run(capsys, "synth", "--n-scenes", 4, "--corrupt", CORRUPT, "--out", tmp_path / "s", "--seed", 11)
    run(capsys, "generate", "--annotations", tmp_path / "s" / "gt_corrupted.json", "--out", tmp_path / "g")
    run(capsys, "generate", "--annotations", tmp_path / "s" / "gt_clean.json", "--out", tmp_path / "clean")
    run(capsys, "correct", "--gt", tmp_path / "g", "--teacher", tmp_path / "s" / "teacher", "--out", tmp_path / "c")
    for k in range(4):
        fixed = read_labelset(tmp_path / "c" / f"{k}.plf")
        clean = read_labelset(tmp_path / "clean" / f"{k}.plf")
        assert fixed.maps.tobytes() == clean.maps.tobytes()


def _ap_fixture(tmp_path):
    xy = [[100.0 + 10 * j, 100.0 + 15 * j] for j in range(18)]
    labeled = {0, 5, 6, 11, 12}
    kps = [c for j, (x, y) in enumerate(xy) for c in ((x, y, 2) if j in labeled else (0, 0, 0))]
    gt = {"images": [{"id": 1, "width": 400, "height": 500}],
          "annotations": [{"id": 1, "image_id": 1, "iscrowd": 0, "area": 20000.0, "keypoints": kps}]}
    parts = [[x, y, 1.0] if j in (0, 5, 6) else None for j, (x, y) in enumerate(xy)]
    (tmp_path / "gt.json").write_text(json.dumps(gt))
    (tmp_path / "res.json").write_text(json.dumps([{"image_id": 1, "poses": [{"parts": parts, "score": 1.0}]}]))
    (tmp_path / "empty.json").write_text(json.dumps([]))
    perfect = [[x, y, 1.0] if j in labeled else None for j, (x, y) in enumerate(xy)]
    (tmp_path / "perfect.json").write_text(
        json.dumps([{"image_id": 1, "poses": [{"parts": perfect, "score": 0.9}]}]))


@pytest.mark.parametrize("preds,ap", [("res.json", "0.3000"), ("empty.json", "0.0000"), ("perfect.json", "1.0000")])
def test_eval_fixtures(capsys, tmp_path, preds, ap):
    _ap_fixture(tmp_path)
    code, out, _ = run(capsys, "eval", "--preds", tmp_path / preds, "--gt", tmp_path / "gt.json")
    assert code == 0
    assert out.splitlines()[0].split() == ["AP", ap]
    report = json.loads((tmp_path / preds).with_suffix(".eval.json").read_text())
    assert report["AP"] == float(ap)


def test_eval_rejects_unknown_images(capsys, tmp_path):
    _ap_fixture(tmp_path)
    (tmp_path / "bad.json").write_text(json.dumps([{"image_id": 9, "poses": []}]))
    code, _, err = run(capsys, "eval", "--preds", tmp_path / "bad.json", "--gt", tmp_path / "gt.json")
    assert code == 2 and "9" in err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "paflc.cli", "parse", "--labels", str(tmp_path / "none"),
                           "--out", str(tmp_path / "r.json")], capture_output=True, text=True)
    assert proc.returncode == 1 and proc.stdout == "" and "none" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "paflc.cli", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 2
