"""Batched prediction and evaluation of a model over samples."""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, no_grad
from .data.loader import make_batch
from .data.records import Sample
from .detection import PostprocessConfig, generate_anchors, postprocess
from .detection.boxes import Detection
from .evaluation import EvalResult, coco_eval, map_at_iou


def model_anchors(model, resolution: int) -> np.ndarray:
    cfg = model.cfg
    hf = resolution // 32
    sizes = [s * resolution / cfg.base_resolution for s in cfg.anchor_sizes]
    return generate_anchors(hf, hf, 32, sizes)


def predict(model, samples: list[Sample], batch_size: int = 4,
            post: PostprocessConfig | None = None) -> dict[int, list[Detection]]:
    """Inference-mode detections keyed by image id. Samples must already be R x R."""
    if not samples:
        return {}
    resolution = samples[0].height
    anchors = model_anchors(model, resolution)
    was_training = model.training
    model.eval()
    out: dict[int, list[Detection]] = {}
    try:
        with no_grad():
            for start in range(0, len(samples), batch_size):
                batch = make_batch(samples[start:start + batch_size])
                x = Tensor(batch.images, dtype=model.parameters()[0].dtype)
                dets = postprocess(model(x), anchors, model.cfg.num_classes, (resolution, resolution), post)
                out.update(zip(batch.image_ids, dets))
    finally:
        model.train(was_training)
    return out


def ground_truth(samples: list[Sample]) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    return {s.image_id: (s.boxes, s.labels) for s in samples}


def evaluate(model, samples: list[Sample], batch_size: int = 4, post: PostprocessConfig | None = None,
             map_iou: float = 0.4) -> tuple[EvalResult, float | None, dict[int, list[Detection]]]:
    """COCO metrics, mAP at ``map_iou`` and the raw detections."""
    dets = predict(model, samples, batch_size, post)
    gts = ground_truth(samples)
    result = coco_eval(dets, gts, model.cfg.num_classes)
    _, m = map_at_iou(dets, gts, map_iou, model.cfg.num_classes)
    return result, m, dets
