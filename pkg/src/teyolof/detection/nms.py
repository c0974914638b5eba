from __future__ import annotations

import numpy as np

from .boxes import Box, Detection, as_boxes, pairwise_iou


def score_order(scores) -> np.ndarray:
    """Indices by descending score, ties broken by lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(len(scores)), -scores))


def nms_indices(boxes, scores, classes, iou_threshold: float = 0.6) -> np.ndarray:
    """Class-wise greedy suppression; returns kept indices by descending score."""
    boxes = as_boxes(boxes)
    classes = np.asarray(classes)
    order = score_order(scores)
    if len(order) == 0:
        return order
    ious = pairwise_iou(boxes, boxes)
    suppressed = np.zeros(len(order), dtype=bool)
    keep = []
    for i in order:
        if suppressed[i]:
            continue
        keep.append(i)
        suppressed |= (classes == classes[i]) & (ious[i] > iou_threshold)
    return np.asarray(keep, dtype=np.int64)


def nms(dets: list[Detection], iou_threshold: float = 0.6) -> list[Detection]:
    if not dets:
        return []
    boxes = np.array([d.box for d in dets], dtype=np.float64)
    scores = np.array([d.score for d in dets])
    classes = np.array([d.class_id for d in dets])
    return [dets[i] for i in nms_indices(boxes, scores, classes, iou_threshold)]


def detections_from_arrays(boxes, scores, classes) -> list[Detection]:
    return [Detection(Box(*map(float, b)), int(c), float(s)) for b, s, c in zip(as_boxes(boxes), scores, classes)]
