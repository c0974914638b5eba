"""Box geometry: IoU, GIoU and anchor-relative delta coding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import ConfigError

# upper bound on log-scale deltas at decode time
DELTA_CLAMP = math.log(1000.0 / 16.0)


class Box(NamedTuple):
    """Axis-aligned box in pixel coordinates (x2 >= x1, y2 >= y1)."""

    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return max(0.0, self.x2 - self.x1) * max(0.0, self.y2 - self.y1)


@dataclass(frozen=True)
class Detection:
    box: Box
    class_id: int
    score: float


def as_boxes(boxes) -> np.ndarray:
    arr = np.asarray(boxes, dtype=np.float64)
    return arr.reshape(-1, 4)


def area(boxes: np.ndarray) -> np.ndarray:
    b = as_boxes(boxes)
    return np.clip(b[:, 2] - b[:, 0], 0, None) * np.clip(b[:, 3] - b[:, 1], 0, None)


def iou(a, b) -> float:
    """Intersection over union of two boxes; 0 when the union is empty."""
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def giou(a, b) -> float:
    """Generalised IoU; falls back to plain IoU for a zero-area enclosing box."""
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    base = inter / union if union > 0 else 0.0
    enclose = (max(a[2], b[2]) - min(a[0], b[0])) * (max(a[3], b[3]) - min(a[1], b[1]))
    if enclose <= 0:
        return base
    return base - (enclose - union) / enclose


def pairwise_iou(a, b) -> np.ndarray:
    """IoU matrix of shape [len(a), len(b)]."""
    a, b = as_boxes(a), as_boxes(b)
    lt = np.maximum(a[:, None, :2], b[None, :, :2])
    rb = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(rb - lt, 0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = area(a)[:, None] + area(b)[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def to_cxcywh(boxes) -> np.ndarray:
    b = as_boxes(boxes)
    w, h = b[:, 2] - b[:, 0], b[:, 3] - b[:, 1]
    return np.stack([b[:, 0] + 0.5 * w, b[:, 1] + 0.5 * h, w, h], axis=1)


def from_cxcywh(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64).reshape(-1, 4)
    half_w, half_h = 0.5 * c[:, 2], 0.5 * c[:, 3]
    return np.stack([c[:, 0] - half_w, c[:, 1] - half_h, c[:, 0] + half_w, c[:, 1] + half_h], axis=1)


def encode_deltas(anchors, gts) -> np.ndarray:
    """(dx, dy, dw, dh) taking each anchor onto its ground-truth box."""
    a, g = to_cxcywh(anchors), to_cxcywh(gts)
    if np.any(a[:, 2:] <= 0):
        raise ConfigError("anchor with non-positive size")
    if np.any(g[:, 2:] <= 0):
        raise ConfigError("cannot encode a ground-truth box with non-positive width or height")
    return np.stack([(g[:, 0] - a[:, 0]) / a[:, 2], (g[:, 1] - a[:, 1]) / a[:, 3],
                     np.log(g[:, 2] / a[:, 2]), np.log(g[:, 3] / a[:, 3])], axis=1)


def decode_deltas(anchors, deltas) -> np.ndarray:
    a = to_cxcywh(anchors)
    d = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    dw = np.minimum(d[:, 2], DELTA_CLAMP)
    dh = np.minimum(d[:, 3], DELTA_CLAMP)
    c = np.stack([a[:, 0] + d[:, 0] * a[:, 2], a[:, 1] + d[:, 1] * a[:, 3],
                  a[:, 2] * np.exp(dw), a[:, 3] * np.exp(dh)], axis=1)
    return from_cxcywh(c)


def clip_boxes(boxes, width: float, height: float) -> np.ndarray:
    b = as_boxes(boxes).copy()
    b[:, 0::2] = np.clip(b[:, 0::2], 0.0, width)
    b[:, 1::2] = np.clip(b[:, 1::2], 0.0, height)
    return b
