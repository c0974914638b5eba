import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import interpolated_ap
from teyolof.detection import Box, Detection
from teyolof.evaluation import (
    IOU_THRESHOLDS,
    EvalResult,
    average_precision,
    class_ap,
    coco_eval,
    format_report,
    map_at_iou,
    match_dets,
    pr_curve,
    write_report_json,
)

GOLDEN = json.loads((Path(__file__).parent / "fixtures" / "ap_golden.json").read_text())


def load_golden():
    gts = {int(k): (v["boxes"], v["labels"]) for k, v in GOLDEN["ground_truth"].items()}
    dets = {int(k): [Detection(Box(*d["box"]), d["class_id"], d["score"]) for d in v]
            for k, v in GOLDEN["detections"].items()}
    return dets, gts


def _frac(v):
    return None if v is None else float(Fraction(*v))


def _close(got, want):
    if want is None:
        return got is None
    return got is not None and abs(got - want) < 1e-9


def test_iou_thresholds():
    assert IOU_THRESHOLDS.tolist() == [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]


# -- matching --------------------------------------------------------------

def test_exact_det_is_tp():
    assert match_dets([[0, 0, 10, 10]], [[0, 0, 10, 10]], 0.5).tolist() == [1]


def test_duplicate_is_fp():
    assert match_dets([[0, 0, 10, 10], [0, 0, 10, 10]], [[0, 0, 10, 10]], 0.5).tolist() == [1, 0]


def test_wrong_class_is_fp():
    dets = {1: [Detection(Box(0, 0, 10, 10), 0, 0.9)]}
    gts = {1: ([[0, 0, 10, 10]], [1])}
    assert class_ap(dets, gts, 1, 0.5) == 0.0
    assert class_ap(dets, gts, 0, 0.5) is None


def test_match_prefers_highest_iou():
    gts = [[0, 0, 10, 10], [1, 0, 11, 10]]
    assert match_dets([[1, 0, 11, 10]], gts, 0.5).tolist() == [1]
    assert match_dets([[1, 0, 11, 10], [0, 0, 10, 10]], gts, 0.5).tolist() == [1, 1]


def test_match_ignored_gt():
    flags = match_dets([[0, 0, 10, 10]], [[0, 0, 10, 10]], 0.5, gt_ignore=[True])
    assert flags.tolist() == [-1]


def test_perfect_iou_at_threshold_one_side():
    assert match_dets([[0, 0, 10, 10]], [[0, 0, 10, 10]], 0.95).tolist() == [1]


# -- AP --------------------------------------------------------------------

def test_all_tp_is_one():
    assert average_precision([1, 1, 1], 3) == 1.0


def test_no_gt_is_undefined():
    assert average_precision([0, 0], 0) is None


def test_no_dets_is_zero():
    assert average_precision([], 4) == 0.0


def test_half_recall():
    assert abs(average_precision([1], 2) - 51 / 101) < 1e-15


def test_envelope_is_monotone():
    curve = pr_curve([1, 0, 1, 0, 0, 1], 4)
    assert np.all(np.diff(curve.precision) <= 0)
    assert np.all(np.diff(curve.recall) >= 0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=40), st.integers(0, 20))
def test_ap_matches_oracle(flags, extra):
    n_gt = sum(flags) + extra
    if n_gt == 0:
        return
    assert abs(average_precision(flags, n_gt) - interpolated_ap(flags, n_gt)) < 1e-12


# -- golden fixture --------------------------------------------------------

@pytest.fixture(scope="module")
def golden_result():
    dets, gts = load_golden()
    return coco_eval(dets, gts)


@pytest.mark.parametrize("key", ["ap", "ap50", "ap75", "ap_small", "ap_medium", "ap_large"])
def test_golden_summary(golden_result, key):
    assert _close(getattr(golden_result, key), _frac(GOLDEN["expected"][key]))


def test_golden_per_class(golden_result):
    for name, want in GOLDEN["expected"]["per_class_ap50"].items():
        assert _close(golden_result.per_class_ap[name], _frac(want)), name


def test_golden_map40():
    dets, gts = load_golden()
    per_class, mean = map_at_iou(dets, gts, 0.4)
    assert _close(mean, _frac(GOLDEN["expected"]["map_at_0.4"]))
    assert per_class["Platelets"] is None


def test_map_at_half_equals_ap50(golden_result):
    dets, gts = load_golden()
    assert map_at_iou(dets, gts, 0.5)[1] == golden_result.ap50


@pytest.mark.parametrize("thr", [0.0, 1.0, -0.2, 1.5])
def test_map_threshold_domain(thr):
    dets, gts = load_golden()
    with pytest.raises(ValueError):
        map_at_iou(dets, gts, thr)


# -- invariants on random data ---------------------------------------------

def _random_case(seed):
    rng = np.random.default_rng(seed)
    gts, dets = {}, {}
    for image_id in range(1, 5):
        n = int(rng.integers(0, 6))
        xy = rng.uniform(0, 150, (n, 2))
        boxes = np.hstack([xy, xy + rng.uniform(8, 120, (n, 2))])
        labels = rng.integers(0, 3, n)
        gts[image_id] = (boxes, labels)
        out = []
        for b, c in zip(boxes, labels):
            if rng.random() < 0.8:
                out.append(Detection(Box(*(b + rng.normal(0, 3, 4))), int(c), float(rng.random())))
        for _ in range(int(rng.integers(0, 4))):
            p = rng.uniform(0, 150, 2)
            out.append(Detection(Box(*p, *(p + rng.uniform(8, 60, 2))), int(rng.integers(0, 3)),
                                 float(rng.random())))
        dets[image_id] = out
    return dets, gts


@pytest.mark.parametrize("seed", range(20))
def test_random_invariants(seed):
    dets, gts = _random_case(seed)
    r = coco_eval(dets, gts)
    for v in (r.ap, r.ap50, r.ap75, r.ap_small, r.ap_medium, r.ap_large):
        assert v is None or 0.0 <= v <= 1.0
    if r.ap is not None:
        assert r.ap <= r.ap50 + 1e-12
        assert r.ap75 <= r.ap50 + 1e-12
    assert map_at_iou(dets, gts, 0.5)[1] == r.ap50


def test_perfect_detections_score_one():
    _, gts = _random_case(3)
    dets = {k: [Detection(Box(*b), int(c), 0.9) for b, c in zip(*v)] for k, v in gts.items()}
    r = coco_eval(dets, gts)
    assert r.ap == 1.0 and r.ap50 == 1.0


# -- reporting -------------------------------------------------------------

def test_report_and_json(tmp_path, golden_result):
    text = format_report(golden_result, 0.5)
    head, values = text.splitlines()[:2]
    assert head.split() == ["AP", "AP50", "AP75", "APS", "APM", "APL", "mAP@0.4"]
    assert values.split()[1] == "91.7" and values.split()[5] == "n/a"
    assert "RBC" in text and "per-class AP at IoU 0.50" in text
    write_report_json(tmp_path / "r.json", golden_result, 0.5)
    back = json.loads((tmp_path / "r.json").read_text())
    assert back["ap_large"] is None and back["map_at_0.4"] == 0.5
    assert EvalResult(**{k: v for k, v in back.items() if k != "map_at_0.4"}) == golden_result
