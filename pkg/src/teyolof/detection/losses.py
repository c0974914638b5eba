"""Focal classification loss and GIoU regression loss on the fused head outputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autograd as ag
from ..autograd import Tensor, ops
from .boxes import DELTA_CLAMP, giou, to_cxcywh
from .matching import uniform_match

PROB_EPS = 1e-7


def focal_loss(prob, target, alpha: float = 0.25, gamma: float = 2.0, weight=None,
               normalizer: float = 1.0):
    """Sum of ``-alpha_t (1 - p_t)^gamma log(p_t)`` divided by ``normalizer``.

    ``prob`` may be a Tensor (result is a scalar Tensor) or plain numbers
    (result is a float). ``weight`` masks out ignored entries.
    """
    plain = not isinstance(prob, Tensor)
    p = ops.clip(ag.as_tensor(prob), PROB_EPS, 1.0 - PROB_EPS)
    t = np.broadcast_to(np.asarray(target, dtype=p.dtype), p.shape)
    p_t = ops.add(ops.mul(p, Tensor(2.0 * t - 1.0, dtype=p.dtype)), Tensor(1.0 - t, dtype=p.dtype))
    alpha_t = alpha * t + (1.0 - alpha) * (1.0 - t)
    if weight is not None:
        alpha_t = alpha_t * np.broadcast_to(weight, p.shape)
    modulator = ops.pow(ops.add_scalar(ops.neg(p_t), 1.0), gamma)
    per_entry = ops.mul(ops.mul(modulator, ops.log(p_t)), Tensor(alpha_t, dtype=p.dtype))
    loss = ops.scale(ops.sum(per_entry), -1.0 / float(normalizer))
    return loss.item() if plain else loss


def giou_loss_box(pred, gt) -> float:
    return 1.0 - giou(pred, gt)


def decode_tensor(anchors_cxcywh: np.ndarray, deltas: Tensor) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    """Differentiable delta decode to (x1, y1, x2, y2) column tensors."""
    a = anchors_cxcywh
    dt = deltas.dtype
    dx, dy, dw, dh = (deltas[:, i] for i in range(4))
    cx = ops.add(ops.mul(dx, Tensor(a[:, 2], dtype=dt)), Tensor(a[:, 0], dtype=dt))
    cy = ops.add(ops.mul(dy, Tensor(a[:, 3], dtype=dt)), Tensor(a[:, 1], dtype=dt))
    half_w = ops.mul(ops.exp(ops.clip(dw, None, DELTA_CLAMP)), Tensor(0.5 * a[:, 2], dtype=dt))
    half_h = ops.mul(ops.exp(ops.clip(dh, None, DELTA_CLAMP)), Tensor(0.5 * a[:, 3], dtype=dt))
    return cx - half_w, cy - half_h, cx + half_w, cy + half_h


def giou_tensor(pred: tuple[Tensor, Tensor, Tensor, Tensor], gt: np.ndarray) -> Tensor:
    px1, py1, px2, py2 = pred
    dt = px1.dtype
    gx1, gy1, gx2, gy2 = (Tensor(gt[:, i], dtype=dt) for i in range(4))
    iw = ops.clip(ops.minimum(px2, gx2) - ops.maximum(px1, gx1), 0.0, None)
    ih = ops.clip(ops.minimum(py2, gy2) - ops.maximum(py1, gy1), 0.0, None)
    inter = iw * ih
    parea = (px2 - px1) * (py2 - py1)
    garea = Tensor((gt[:, 2] - gt[:, 0]) * (gt[:, 3] - gt[:, 1]), dtype=dt)
    union = parea + garea - inter
    ew = ops.maximum(px2, gx2) - ops.minimum(px1, gx1)
    eh = ops.maximum(py2, gy2) - ops.minimum(py1, gy1)
    enclose = ew * eh
    return ops.div(inter, union) - ops.div(enclose - union, enclose)


def giou_loss(pred, gt, normalizer: float = 1.0):
    """Sum of ``1 - giou`` over box pairs divided by ``normalizer``.

    ``pred`` is either a 4-tuple of column Tensors or an ``[P, 4]`` array.
    """
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 4)
    if isinstance(pred, tuple):
        g = giou_tensor(pred, gt)
        return ops.scale(ops.sum(ops.add_scalar(ops.neg(g), 1.0)), 1.0 / float(normalizer))
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 4)
    return float(sum(1.0 - giou(p, q) for p, q in zip(pred, gt))) / float(normalizer)


@dataclass
class LossConfig:
    alpha: float = 0.25
    gamma: float = 2.0
    cls_weight: float = 1.0
    reg_weight: float = 1.0
    match_k: int = 4
    match_metric: str = "center"
    match_exclusive: bool = True
    pos_iou: float = 0.15
    ignore_iou: float = 0.7


@dataclass
class LossOutput:
    total: Tensor
    cls: Tensor
    reg: Tensor
    num_positive: int


def flatten_scores(scores: Tensor) -> Tensor:
    """[N, A, K, H, W] -> [N, H*W*A, K] in anchor order."""
    n, a, k, h, w = scores.shape
    return scores.transpose(0, 3, 4, 1, 2).reshape(n, h * w * a, k)


def flatten_deltas(reg_deltas: Tensor, num_anchors: int) -> Tensor:
    """[N, A*4, H, W] -> [N*H*W*A, 4] in anchor order."""
    n, _, h, w = reg_deltas.shape
    return reg_deltas.reshape(n, num_anchors, 4, h, w).transpose(0, 3, 4, 1, 2).reshape(n * h * w * num_anchors, 4)


def detection_loss(output, anchors: np.ndarray, targets, num_classes: int,
                   cfg: LossConfig | None = None) -> LossOutput:
    """Focal loss on fused scores plus GIoU loss on decoded positive boxes.

    ``targets`` is a list (one per image) of ``(boxes [G,4], labels [G])``.
    Both terms are normalised by ``max(1, #positives)`` over the batch.
    """
    from ..model import fuse_scores

    cfg = cfg or LossConfig()
    scores = flatten_scores(fuse_scores(output.cls_logits, output.obj_logits, num_classes))
    n, m, k = scores.shape
    cls_target = np.zeros((n, m, k))
    weight = np.ones((n, m, 1))
    pos_rows, pos_boxes = [], []
    for b, (boxes, labels) in enumerate(targets):
        boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        match = uniform_match(anchors, boxes, cfg.match_k, cfg.pos_iou, cfg.ignore_iou, cfg.match_metric,
                             cfg.match_exclusive)
        pos = np.flatnonzero(match.positive)
        cls_target[b, pos, labels[match.labels[pos]]] = 1.0
        weight[b, match.ignored, 0] = 0.0
        pos_rows.append(b * m + pos)
        pos_boxes.append(boxes[match.labels[pos]])
    rows = np.concatenate(pos_rows)
    npos = len(rows)
    norm = max(1.0, float(npos))

    cls_loss = focal_loss(scores, cls_target, cfg.alpha, cfg.gamma, weight, norm)
    if npos:
        deltas = flatten_deltas(output.reg_deltas, output.obj_logits.shape[1])
        anchor_c = to_cxcywh(np.tile(anchors, (n, 1))[rows])
        pred = decode_tensor(anchor_c, deltas[rows])
        reg_loss = giou_loss(pred, np.concatenate(pos_boxes), norm)
    else:
        reg_loss = ops.scale(ops.sum(output.reg_deltas), 0.0)
    total = ops.add(ops.scale(cls_loss, cfg.cls_weight), ops.scale(reg_loss, cfg.reg_weight))
    return LossOutput(total, cls_loss, reg_loss, npos)
