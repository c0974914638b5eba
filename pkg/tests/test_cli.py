import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import tiny_config
from oracles import walk_param_count
from teyolof.cli import draw_boxes, main
from teyolof.config import save_config
from teyolof.data import read_manifest, read_ppm, write_ppm
from teyolof.detection import Box, Detection
from teyolof.model import TEYOLOF
from teyolof.training import save_checkpoint

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--n", "10", "--seed", "1", "--size", "64", "--out", str(out)]) == 0
    return out


def test_synth_writes_dataset(synth_dir):
    assert len(list(synth_dir.glob("*.ppm"))) == 10
    data = json.loads((synth_dir / "annotations.json").read_text())
    assert len(data["images"]) == 10


def test_convert_matches_golden(tmp_path, capsys):
    out = tmp_path / "ann.json"
    assert main(["convert", str(FIXTURES / "voc"), "--out", str(out)]) == 0
    assert out.read_bytes() == (FIXTURES / "voc_golden.json").read_bytes()
    assert "converted 3 images" in capsys.readouterr().out


def test_convert_rewrites_image_suffix(tmp_path):
    out = tmp_path / "ann.json"
    assert main(["convert", str(FIXTURES / "voc"), "--out", str(out), "--image-ext", ".ppm"]) == 0
    names = [im["file_name"] for im in json.loads(out.read_text())["images"]]
    assert all(n.endswith(".ppm") for n in names)


def test_split_writes_manifest(synth_dir, tmp_path, capsys):
    out = tmp_path / "split.tsv"
    assert main(["split", "--annotations", str(synth_dir / "annotations.json"), "--seed", "2",
                 "--out", str(out)]) == 0
    assert read_manifest(out).sizes() == (7, 2, 1)
    assert "train" in capsys.readouterr().out


@pytest.fixture(scope="module")
def trained(synth_dir, tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    save_config(root / "tiny.cfg", tiny_config())
    rc = main(["train", "--annotations", str(synth_dir / "annotations.json"), "--images", str(synth_dir),
               "--config", str(root / "tiny.cfg"), "--out", str(root / "run"), "--epochs", "2",
               "--warmup", "2", "--drop-epochs", "2", "--resolution", "64", "--quiet"])
    assert rc == 0
    return root / "run"


def test_train_outputs(trained):
    iters = [json.loads(x) for x in (trained / "log.jsonl").read_text().splitlines()]
    assert sum(r["kind"] == "iter" for r in iters) == 6  # 2 epochs x ceil(10 / 4)
    assert (trained / "best.tylf").exists() and (trained / "last.tylf").exists()


def test_eval_reports(trained, synth_dir, tmp_path, capsys):
    rc = main(["eval", "--annotations", str(synth_dir / "annotations.json"), "--images", str(synth_dir),
               "--config", str(trained / "model.cfg"), "--checkpoint", str(trained / "last.tylf"),
               "--report", str(tmp_path / "r.txt"), "--json", str(tmp_path / "r.json")])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.split("\n")[0].split() == ["AP", "AP50", "AP75", "APS", "APM", "APL", "mAP@0.4"]
    assert (tmp_path / "r.txt").read_text() == out
    result = json.loads((tmp_path / "r.json").read_text())
    assert set(result) >= {"ap", "ap50", "per_class_ap", "map_at_0.4"}


def _overlap_model(tmp_path):
    """1x1 grid with two overlapping anchors (IoU 0.79) that both fire class 0."""
    cfg = tiny_config(anchor_sizes=(16.0, 18.0), base_resolution=32, input_resolution=32)
    model = TEYOLOF(cfg)
    dec = model.decoder
    for conv in (dec.cls_pred, dec.reg_pred, dec.obj_pred):
        conv.weight.data[...] = 0.0
        conv.bias.data[...] = 0.0
    dec.cls_pred.bias.data[...] = -10.0
    dec.cls_pred.bias.data[[0, 3]] = 10.0  # anchor a, class 0 sits at channel a * K
    dec.obj_pred.bias.data[...] = 10.0
    save_config(tmp_path / "m.cfg", cfg)
    save_checkpoint(tmp_path / "m.tylf", model)
    write_ppm(tmp_path / "img.ppm", np.full((32, 32, 3), 128, dtype=np.uint8))


@pytest.mark.parametrize("thr, expected", [("0.6", 1), ("0.95", 2)])
def test_detect_applies_nms(tmp_path, thr, expected):
    _overlap_model(tmp_path)
    out = tmp_path / "out"
    rc = main(["detect", str(tmp_path / "img.ppm"), "--config", str(tmp_path / "m.cfg"),
               "--checkpoint", str(tmp_path / "m.tylf"), "--out", str(out), "--nms", thr])
    assert rc == 0
    lines = (out / "detections.txt").read_text().splitlines()
    assert len(lines) == expected
    assert all(line.split()[1] == "0" for line in lines)
    assert re.fullmatch(r"1 0 \d\.\d{6} \d+\.\d{2} \d+\.\d{2} \d+\.\d{2} \d+\.\d{2}", lines[0])
    drawn = read_ppm(out / "img_det.ppm")
    assert drawn.shape == (32, 32, 3) and (drawn != 128).any()
    records = json.loads((out / "detections.json").read_text())
    assert records[0]["category_id"] == 1 and len(records) == expected


def test_draw_boxes_outlines_only():
    img = np.zeros((10, 10, 3), dtype=np.uint8)
    out = draw_boxes(img, [Detection(Box(2, 2, 7, 7), 1, 0.9)])
    assert (out[2, 2:8] != 0).all() and (out[7, 2:8] != 0).all()
    assert (out[4, 4] == 0).all()
    assert (img == 0).all()


def test_params_matches_walker(capsys):
    assert main(["params", "--phi", "0"]) == 0
    out = capsys.readouterr().out
    count = int(re.search(r"params (\d+)", out).group(1))
    assert count == walk_param_count(TEYOLOF()) == 5_393_832
    assert "resolution 416" in out and "GFLOPs 1.961" in out


def test_gradcheck_subcommand(capsys):
    assert main(["gradcheck", "--seeds", "1"]) == 0
    out = capsys.readouterr().out
    assert out.strip().splitlines()[-1].endswith("within 0.0001")
    assert "FAIL" not in out


def test_config_subcommand(tmp_path):
    assert main(["config", "--out", str(tmp_path / "d.cfg")]) == 0
    assert "encoder_channels = 512" in (tmp_path / "d.cfg").read_text()


def test_unknown_flag_fails(capsys):
    assert main(["params", "--bogus"]) != 0
    assert "unrecognized" in capsys.readouterr().err


def test_missing_file_fails(tmp_path, capsys):
    assert main(["split", "--annotations", str(tmp_path / "nope.json"), "--out", str(tmp_path / "s")]) != 0
    assert "nope.json" in capsys.readouterr().err


def test_bad_config_reports_error(tmp_path, capsys):
    (tmp_path / "bad.cfg").write_text("encoder_channels = lots\n")
    assert main(["params", "--config", str(tmp_path / "bad.cfg")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "encoder_channels" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "teyolof", "params", "--resolution", "64"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "resolution 64" in proc.stdout
