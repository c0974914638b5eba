"""Uniform anchor-to-ground-truth assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .boxes import as_boxes, pairwise_iou, to_cxcywh

NEGATIVE = -1
IGNORE = -2


@dataclass
class MatchResult:
    """Per-anchor label: a GT index (positive), NEGATIVE or IGNORE."""

    labels: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        return self.labels >= 0

    @property
    def negative(self) -> np.ndarray:
        return self.labels == NEGATIVE

    @property
    def ignored(self) -> np.ndarray:
        return self.labels == IGNORE

    @property
    def num_positive(self) -> int:
        return int(np.count_nonzero(self.labels >= 0))


def match_distance(anchors: np.ndarray, gts: np.ndarray, metric: str = "center") -> np.ndarray:
    """L1 distance matrix [A, G] between anchors and GTs.

    ``center`` compares box centres only; ``cxcywh`` also adds the width and
    height differences, so anchors of a similar size rank first.
    """
    a, g = to_cxcywh(anchors), to_cxcywh(gts)
    cols = {"center": 2, "cxcywh": 4}.get(metric)
    if cols is None:
        raise ConfigError(f"unknown match metric {metric!r}")
    return np.abs(a[:, None, :cols] - g[None, :, :cols]).sum(axis=-1)


def uniform_match(anchors, gts, k: int = 4, pos_iou: float = 0.15, ignore_iou: float = 0.7,
                  metric: str = "center", exclusive: bool = False) -> MatchResult:
    """Assign each GT its ``k`` nearest anchors.

    Ties in distance go to the lower anchor index. An anchor chosen by several
    GTs keeps the nearest one (lower GT index on ties). Chosen anchors whose
    IoU with their GT is below ``pos_iou`` become negative; unchosen anchors
    whose best IoU exceeds ``ignore_iou`` are ignored.

    With ``exclusive`` the choice is a greedy one-to-one assignment instead:
    every GT first takes its nearest free anchor, then GTs fill up to ``k``
    free anchors in order of distance. The first anchor of each GT is kept
    even below ``pos_iou``, so no GT is left without a positive while free
    anchors remain.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    anchors = as_boxes(anchors)
    gts = as_boxes(gts)
    labels = np.full(len(anchors), NEGATIVE, dtype=np.int64)
    if len(gts) == 0 or len(anchors) == 0:
        return MatchResult(labels)

    dist = match_distance(anchors, gts, metric)
    if exclusive:
        return _exclusive_match(anchors, gts, dist, k, pos_iou, ignore_iou)
    kk = min(k, len(anchors))
    best_dist = np.full(len(anchors), np.inf)
    selected = np.zeros(len(anchors), dtype=bool)
    for gi in range(len(gts)):
        order = np.argsort(dist[:, gi], kind="stable")[:kk]
        selected[order] = True
        closer = dist[order, gi] < best_dist[order]
        labels[order[closer]] = gi
        best_dist[order[closer]] = dist[order[closer], gi]

    ious = pairwise_iou(anchors, gts)
    pos = np.flatnonzero(labels >= 0)
    weak = ious[pos, labels[pos]] < pos_iou
    labels[pos[weak]] = NEGATIVE

    ignore = ~selected & (ious.max(axis=1) > ignore_iou)
    labels[ignore] = IGNORE
    return MatchResult(labels)


def _exclusive_match(anchors, gts, dist, k, pos_iou, ignore_iou) -> MatchResult:
    n_a, n_g = dist.shape
    labels = np.full(n_a, NEGATIVE, dtype=np.int64)
    # pairs sorted by distance, then anchor index, then GT index
    flat = np.lexsort((np.tile(np.arange(n_g), n_a), np.repeat(np.arange(n_a), n_g), dist.ravel()))
    pair_a, pair_g = flat // n_g, flat % n_g
    taken = np.zeros(n_g, dtype=np.int64)
    keep = np.zeros(n_a, dtype=bool)
    for cap in (1, k):
        for ai, gi in zip(pair_a, pair_g):
            if labels[ai] == NEGATIVE and taken[gi] < cap:
                labels[ai] = gi
                taken[gi] += 1
                keep[ai] = cap == 1
    selected = labels >= 0
    ious = pairwise_iou(anchors, gts)
    pos = np.flatnonzero(selected & ~keep)
    labels[pos[ious[pos, labels[pos]] < pos_iou]] = NEGATIVE
    labels[~selected & (ious.max(axis=1) > ignore_iou)] = IGNORE
    return MatchResult(labels)
