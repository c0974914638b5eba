"""Turn raw head outputs into per-image detection lists, and export them."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .boxes import Detection, clip_boxes, decode_deltas
from .nms import detections_from_arrays, nms_indices, score_order


@dataclass
class PostprocessConfig:
    score_threshold: float = 0.01
    pre_nms_topk: int = 300
    nms_threshold: float = 0.6
    max_detections: int = 100


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def postprocess(output, anchors: np.ndarray, num_classes: int, image_size: tuple[int, int],
                cfg: PostprocessConfig | None = None) -> list[list[Detection]]:
    """Score fusion, top-k, decoding, clipping and class-wise NMS per image."""
    cfg = cfg or PostprocessConfig()
    cls = output.cls_logits.data if hasattr(output.cls_logits, "data") else output.cls_logits
    obj = output.obj_logits.data if hasattr(output.obj_logits, "data") else output.obj_logits
    reg = output.reg_deltas.data if hasattr(output.reg_deltas, "data") else output.reg_deltas
    n, a, h, w = obj.shape
    scores = _sigmoid(cls.reshape(n, a, num_classes, h, w)) * _sigmoid(obj.reshape(n, a, 1, h, w))
    scores = scores.transpose(0, 3, 4, 1, 2).reshape(n, -1, num_classes)
    deltas = reg.reshape(n, a, 4, h, w).transpose(0, 3, 4, 1, 2).reshape(n, -1, 4)
    height, width = image_size
    results = []
    for b in range(n):
        flat = scores[b].reshape(-1)
        cand = np.flatnonzero(flat > cfg.score_threshold)
        cand = cand[score_order(flat[cand])][:cfg.pre_nms_topk]
        anchor_idx, classes = np.divmod(cand, num_classes)
        boxes = clip_boxes(decode_deltas(anchors[anchor_idx], deltas[b, anchor_idx]), width, height)
        keep = nms_indices(boxes, flat[cand], classes, cfg.nms_threshold)[:cfg.max_detections]
        results.append(detections_from_arrays(boxes[keep], flat[cand][keep], classes[keep]))
    return results


def format_detection_lines(image_id: int, dets: list[Detection]) -> list[str]:
    """One line per detection: image_id class_id score x1 y1 x2 y2."""
    return [f"{image_id} {d.class_id} {d.score:.6f} {d.box[0]:.2f} {d.box[1]:.2f} {d.box[2]:.2f} {d.box[3]:.2f}"
            for d in dets]


def to_coco_results(per_image: dict[int, list[Detection]]) -> list[dict]:
    """COCO results records; category ids are class ids + 1."""
    out = []
    for image_id in sorted(per_image):
        for d in per_image[image_id]:
            x1, y1, x2, y2 = (float(v) for v in d.box)
            out.append({"image_id": int(image_id), "category_id": int(d.class_id) + 1,
                        "bbox": [round(x1, 2), round(y1, 2), round(x2 - x1, 2), round(y2 - y1, 2)],
                        "score": round(float(d.score), 6)})
    return out


def write_detections(path_txt, path_json, per_image: dict[int, list[Detection]]) -> None:
    lines = []
    for image_id in sorted(per_image):
        lines.extend(format_detection_lines(image_id, per_image[image_id]))
    with open(path_txt, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    if path_json is not None:
        with open(path_json, "w", encoding="utf-8") as fh:
            json.dump(to_coco_results(per_image), fh, indent=1)
