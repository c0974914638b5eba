"""COCO-style box AP and the single-threshold mAP protocol.

Conventions follow the public COCO evaluator: 101 recall points, IoU
thresholds 0.50:0.05:0.95, at most 100 detections per image and class, GT
size buckets by box area (small < 32^2 <= medium < 96^2 <= large), GTs
outside the bucket are ignored rather than counted as misses. Classes
without any ground truth have undefined AP and are left out of means.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data.records import CLASSES, AnnotationSet
from .detection.boxes import Detection, pairwise_iou

IOU_THRESHOLDS = np.round(np.linspace(0.5, 0.95, 10), 2)
NUM_RECALL_POINTS = 101  # recall 0, 0.01, ..., 1
AREA_RANGES = {"all": (0.0, 1e10), "small": (0.0, 32.0 ** 2), "medium": (32.0 ** 2, 96.0 ** 2),
               "large": (96.0 ** 2, 1e10)}
MAX_DETS = 100


@dataclass
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray  # after the monotone envelope


@dataclass
class EvalResult:
    """All values are fractions in [0, 1]; None marks an undefined value."""

    ap: float | None
    ap50: float | None
    ap75: float | None
    ap_small: float | None
    ap_medium: float | None
    ap_large: float | None
    per_class_ap: dict[str, float | None] = field(default_factory=dict)
    per_class_iou: float = 0.5

    def to_dict(self) -> dict:
        return asdict(self)


def match_dets(dets, gts, iou_thr: float, gt_ignore=None) -> np.ndarray:
    """Greedy matching of score-sorted detections to one class's GTs of one image.

    Returns per-detection flags: 1 true positive, 0 false positive, -1 when
    the detection matched an ignored GT. ``dets``/``gts`` are ``[n, 4]``
    boxes. Each detection takes the unmatched GT of highest IoU >= ``iou_thr``;
    non-ignored GTs are preferred over ignored ones.
    """
    dets = np.asarray(dets, dtype=np.float64).reshape(-1, 4)
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    ignore = np.zeros(len(gts), dtype=bool) if gt_ignore is None else np.asarray(gt_ignore, dtype=bool)
    flags = np.zeros(len(dets), dtype=np.int64)
    if len(dets) == 0 or len(gts) == 0:
        return flags
    gorder = np.argsort(ignore, kind="stable")  # non-ignored first
    ious = pairwise_iou(dets, gts[gorder])
    ign = ignore[gorder]
    taken = np.zeros(len(gts), dtype=bool)
    thr = min(iou_thr, 1 - 1e-10)
    for d in range(len(dets)):
        best, best_iou = -1, thr
        for g in range(len(gts)):
            if taken[g]:
                continue
            if best > -1 and not ign[best] and ign[g]:
                break
            if ious[d, g] < best_iou:
                continue
            best, best_iou = g, ious[d, g]
        if best >= 0:
            taken[best] = True
            flags[d] = -1 if ign[best] else 1
    return flags


def pr_curve(flags, n_gt: int) -> PRCurve:
    """Precision/recall along score-sorted TP(1)/FP(0) flags, with the envelope applied."""
    flags = np.asarray(flags, dtype=np.int64)
    tp = np.cumsum(flags == 1)
    fp = np.cumsum(flags == 0)
    recall = tp / n_gt if n_gt else np.zeros(len(flags))
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
    envelope = np.maximum.accumulate(precision[::-1])[::-1] if len(precision) else precision
    return PRCurve(recall, envelope)


def average_precision(flags, n_gt: int) -> float | None:
    """101-point interpolated AP of score-sorted TP/FP flags; None when ``n_gt == 0``."""
    if n_gt == 0:
        return None
    flags = np.asarray(flags, dtype=np.int64)
    curve = pr_curve(flags, n_gt)
    # recall >= i/100 is tested exactly, as 100 * tp >= i * n_gt
    tp100 = np.cumsum(flags == 1) * 100
    idx = np.searchsorted(tp100, np.arange(NUM_RECALL_POINTS) * n_gt, side="left")
    sampled = np.zeros(NUM_RECALL_POINTS)
    ok = idx < len(flags)
    sampled[ok] = curve.precision[idx[ok]]
    return float(sampled.mean())


def _ground_truth(gts) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    if isinstance(gts, AnnotationSet):
        return {e.image_id: (e.boxes, e.labels) for e in gts.images}
    return {int(k): (np.asarray(b, dtype=np.float64).reshape(-1, 4), np.asarray(lab, dtype=np.int64).reshape(-1))
            for k, (b, lab) in gts.items()}


def _class_flags(dets: dict[int, list[Detection]], gts, cls: int, iou_thr: float, area_rng):
    """Scores, flags (1/0, ignored ones removed) and GT count for one class over all images."""
    lo, hi = area_rng
    all_scores, all_flags, n_gt = [], [], 0
    for image_id, (boxes, labels) in gts.items():
        g = boxes[labels == cls]
        g_area = (g[:, 2] - g[:, 0]) * (g[:, 3] - g[:, 1])
        g_ignore = (g_area < lo) | (g_area > hi)
        n_gt += int(np.count_nonzero(~g_ignore))
        ds = [d for d in dets.get(image_id, []) if d.class_id == cls]
        if not ds:
            continue
        scores = np.array([d.score for d in ds])
        order = np.argsort(-scores, kind="mergesort")[:MAX_DETS]
        d_boxes = np.array([ds[i].box for i in order], dtype=np.float64).reshape(-1, 4)
        flags = match_dets(d_boxes, g, iou_thr, g_ignore)
        d_area = (d_boxes[:, 2] - d_boxes[:, 0]) * (d_boxes[:, 3] - d_boxes[:, 1])
        # unmatched detections outside the bucket do not count against it
        flags[(flags == 0) & ((d_area < lo) | (d_area > hi))] = -1
        all_scores.append(scores[order])
        all_flags.append(flags)
    if not all_scores:
        return np.zeros(0), np.zeros(0, dtype=np.int64), n_gt
    scores = np.concatenate(all_scores)
    flags = np.concatenate(all_flags)
    order = np.argsort(-scores, kind="mergesort")
    flags = flags[order]
    return scores[order], flags[flags >= 0], n_gt


def class_ap(dets, gts, cls: int, iou_thr: float, area: str = "all") -> float | None:
    _, flags, n_gt = _class_flags(dets, _ground_truth(gts), cls, iou_thr, AREA_RANGES[area])
    return average_precision(flags, n_gt)


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _mean_over_thresholds(dets, gts, classes, area: str) -> float | None:
    """AP averaged over classes, then over the ten IoU thresholds."""
    per_thr = [_mean(class_ap(dets, gts, c, t, area) for c in classes) for t in IOU_THRESHOLDS]
    return _mean(per_thr)


def coco_eval(dets: dict[int, list[Detection]], gts, num_classes: int = len(CLASSES),
              class_names=CLASSES, per_class_iou: float = 0.5) -> EvalResult:
    """Full COCO box metrics. ``dets`` maps image id to detections; ``gts`` is an
    AnnotationSet or a mapping image id -> (boxes, labels)."""
    gts = _ground_truth(gts)
    classes = range(num_classes)
    return EvalResult(
        ap=_mean_over_thresholds(dets, gts, classes, "all"),
        ap50=_mean(class_ap(dets, gts, c, 0.5) for c in classes),
        ap75=_mean(class_ap(dets, gts, c, 0.75) for c in classes),
        ap_small=_mean_over_thresholds(dets, gts, classes, "small"),
        ap_medium=_mean_over_thresholds(dets, gts, classes, "medium"),
        ap_large=_mean_over_thresholds(dets, gts, classes, "large"),
        per_class_ap={class_names[c]: class_ap(dets, gts, c, per_class_iou) for c in classes},
        per_class_iou=per_class_iou,
    )


def map_at_iou(dets, gts, thr: float = 0.4, num_classes: int = len(CLASSES),
               class_names=CLASSES) -> tuple[dict[str, float | None], float | None]:
    """Class-wise AP at one IoU threshold and its mean over classes with GT."""
    if not 0.0 < thr < 1.0:
        raise ValueError(f"IoU threshold must lie in (0, 1), got {thr}")
    per_class = {class_names[c]: class_ap(dets, gts, c, thr) for c in range(num_classes)}
    return per_class, _mean(per_class.values())


def _pct(v) -> str:
    return "  n/a" if v is None else f"{100.0 * v:5.1f}"


def format_report(result: EvalResult, map40: float | None = None) -> str:
    """Plain-text table: AP, AP50, AP75, APS, APM, APL (x100), then per-class AP."""
    head = ["AP", "AP50", "AP75", "APS", "APM", "APL"]
    vals = [result.ap, result.ap50, result.ap75, result.ap_small, result.ap_medium, result.ap_large]
    if map40 is not None:
        head.append("mAP@0.4")
        vals.append(map40)
    lines = ["  ".join(f"{h:>7}" for h in head), "  ".join(f"{_pct(v):>7}" for v in vals), ""]
    lines.append(f"per-class AP at IoU {result.per_class_iou:.2f}:")
    for name, v in result.per_class_ap.items():
        lines.append(f"  {name:<10} {_pct(v)}")
    return "\n".join(lines) + "\n"


def write_report_json(path, result: EvalResult, map40: float | None = None) -> None:
    payload = result.to_dict()
    if map40 is not None:
        payload["map_at_0.4"] = map40
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
