from __future__ import annotations

import numpy as np

from ..errors import ConfigError


def generate_anchors(hf: int, wf: int, stride: float, sizes) -> np.ndarray:
    """Square anchors centred on each cell, ordered row-major over cells and size-minor.

    Anchor index ``(i * wf + j) * len(sizes) + a`` is size ``sizes[a]`` at cell
    row ``i``, column ``j``; returns an ``[hf*wf*A, 4]`` xyxy array.
    """
    if stride <= 0:
        raise ConfigError("anchor stride must be positive")
    sizes = np.asarray(sizes, dtype=np.float64)
    ys, xs = np.meshgrid(np.arange(hf), np.arange(wf), indexing="ij")
    cx = ((xs.reshape(-1) + 0.5) * stride)[:, None]
    cy = ((ys.reshape(-1) + 0.5) * stride)[:, None]
    half = 0.5 * sizes[None, :]
    boxes = np.stack([cx - half, cy - half, cx + half, cy + half], axis=-1)
    return boxes.reshape(-1, 4)
