"""Synthetic blood-smear images with exact ground truth.

Large ellipses stand in for WBCs, medium discs for RBCs and small dots for
platelets, on a noisy pink background. Centres and radii are multiples of
1/64 px so boxes survive xyxy/xywh conversion exactly. Overlaps are allowed
but placement is retried while a new cell would hide most of an earlier one.
"""

from __future__ import annotations

import numpy as np

from .records import CLASSES, AnnotationSet, Sample
from .rng import SplitMix64

PLATELET, RBC, WBC = (CLASSES.index(c) for c in ("Platelets", "RBC", "WBC"))

# diameter bands as fractions of the image side
SIZE_BANDS = {WBC: (0.35, 0.50), RBC: (0.12, 0.20), PLATELET: (0.03, 0.06)}
COUNT_RANGES = {WBC: (0, 2), RBC: (5, 15), PLATELET: (0, 4)}
DRAW_ORDER = (WBC, RBC, PLATELET)
# placement retries: a new cell may cover at most this share of an earlier box
MAX_COVER = 0.5
PLACE_TRIES = 30

_BACKGROUND = np.array([232.0, 206.0, 208.0])
_COLOURS = {RBC: np.array([205.0, 92.0, 96.0]), WBC: np.array([128.0, 78.0, 170.0]),
            PLATELET: np.array([96.0, 44.0, 128.0])}


def _q(v: float) -> float:
    return round(v * 64.0) / 64.0


def _cover(box, boxes) -> float:
    """Largest fraction of any earlier box (or of ``box``) covered by their overlap."""
    worst = 0.0
    area = (box[2] - box[0]) * (box[3] - box[1])
    for b in boxes:
        iw = min(box[2], b[2]) - max(box[0], b[0])
        ih = min(box[3], b[3]) - max(box[1], b[1])
        if iw > 0 and ih > 0:
            other = (b[2] - b[0]) * (b[3] - b[1])
            worst = max(worst, iw * ih / min(area, other))
    return worst


def _place(rng: SplitMix64, size: int, rx: float, ry: float, boxes: list) -> tuple[float, float]:
    for _ in range(PLACE_TRIES):
        cx = _q(rng.uniform(rx, size - rx))
        cy = _q(rng.uniform(ry, size - ry))
        if _cover([cx - rx, cy - ry, cx + rx, cy + ry], boxes) <= MAX_COVER:
            break
    return cx, cy


def render_image(rng: SplitMix64, size: int) -> tuple[np.ndarray, list, list]:
    img = np.empty((size, size, 3))
    img[:] = _BACKGROUND
    noise = rng.random_array((size, size, 1))
    img += (noise - 0.5) * 24.0
    ys, xs = np.mgrid[0:size, 0:size]
    px, py = xs + 0.5, ys + 0.5
    boxes, labels = [], []
    for cls in DRAW_ORDER:
        lo, hi = COUNT_RANGES[cls]
        for _ in range(rng.randint(lo, hi)):
            dlo, dhi = SIZE_BANDS[cls]
            rx = _q(0.5 * size * rng.uniform(dlo, dhi))
            ry = rx if cls != WBC else _q(0.5 * size * rng.uniform(dlo, dhi))
            rx, ry = max(rx, 1.0), max(ry, 1.0)
            cx, cy = _place(rng, size, rx, ry, boxes)
            r2 = ((px - cx) / rx) ** 2 + ((py - cy) / ry) ** 2
            inside = r2 <= 1.0
            colour = _COLOURS[cls]
            if cls == RBC:
                # paler centre, as in a biconcave disc
                shade = colour + (np.clip(1.0 - r2, 0, 1) * 60.0)[..., None]
            elif cls == WBC:
                shade = colour - ((r2 < 0.35) * 50.0)[..., None]
            else:
                shade = np.broadcast_to(colour, img.shape)
            img[inside] = shade[inside] if shade.shape == img.shape else colour
            boxes.append([cx - rx, cy - ry, cx + rx, cy + ry])
            labels.append(cls)
    image = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return image, boxes, labels


def synth_generate(n_images: int, seed: int = 0, size: int = 128) -> list[Sample]:
    """``n_images`` samples, image ids 1..n, each from its own substream of ``seed``."""
    samples = []
    for i in range(1, n_images + 1):
        rng = SplitMix64.derive(seed, i)
        image, boxes, labels = render_image(rng, size)
        samples.append(Sample(image, boxes, labels, image_id=i, source_path=f"synth_{i:05d}.ppm"))
    return samples


def to_annotations(samples: list[Sample]) -> AnnotationSet:
    return AnnotationSet([s.entry() for s in samples])
