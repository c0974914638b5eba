"""Resize, augmentation and normalisation of samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .records import Sample
from .rng import SplitMix64

MEAN = np.array([0.485, 0.456, 0.406])
STD = np.array([0.229, 0.224, 0.225])


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-centre bilinear resampling of an HxWxC array (float result)."""
    h, w = image.shape[:2]
    img = image.astype(np.float64)
    if (h, w) == (out_h, out_w):
        return img

    def coords(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = coords(out_h, h)
    x0, x1, fx = coords(out_w, w)
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy[:, None, None]) + bot * fy[:, None, None]


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def clip_to_image(boxes: np.ndarray, width: float, height: float) -> np.ndarray:
    b = boxes.copy()
    b[:, 0::2] = np.clip(b[:, 0::2], 0.0, width)
    b[:, 1::2] = np.clip(b[:, 1::2], 0.0, height)
    return b


def resize_to(sample: Sample, size: int = 416) -> Sample:
    """Non-aspect-preserving bilinear resize to ``size`` x ``size``."""
    if size % 32:
        raise ConfigError(f"resize target {size} must be divisible by 32")
    h, w = sample.height, sample.width
    if (h, w) == (size, size):
        return Sample(sample.image.copy(), sample.boxes.copy(), sample.labels.copy(),
                      sample.image_id, sample.source_path)
    image = to_uint8(bilinear_resize(sample.image, size, size))
    boxes = sample.boxes * np.array([size / w, size / h, size / w, size / h])
    return Sample(image, clip_to_image(boxes, size, size), sample.labels.copy(), sample.image_id, sample.source_path)


@dataclass
class AugmentationConfig:
    hflip_p: float = 0.5
    vflip_p: float = 0.5
    crop_max_frac: float = 0.15
    brightness_range: tuple[float, float] = (0.85, 1.15)
    exposure_range: tuple[float, float] = (0.85, 1.15)
    seed: int = 0
    min_box_keep: float = 0.25

    def validate(self) -> None:
        if not (0 <= self.hflip_p <= 1 and 0 <= self.vflip_p <= 1):
            raise ConfigError("flip probabilities must lie in [0, 1]")
        if not 0 <= self.crop_max_frac < 0.5:
            raise ConfigError("crop_max_frac must lie in [0, 0.5)")


def hflip(sample: Sample) -> Sample:
    w = sample.width
    boxes = sample.boxes.copy()
    boxes[:, [0, 2]] = w - sample.boxes[:, [2, 0]]
    return Sample(sample.image[:, ::-1].copy(), boxes, sample.labels.copy(), sample.image_id, sample.source_path)


def vflip(sample: Sample) -> Sample:
    h = sample.height
    boxes = sample.boxes.copy()
    boxes[:, [1, 3]] = h - sample.boxes[:, [3, 1]]
    return Sample(sample.image[::-1].copy(), boxes, sample.labels.copy(), sample.image_id, sample.source_path)


def crop(sample: Sample, left: float, top: float, right: float, bottom: float, min_keep: float = 0.25) -> Sample:
    """Cut fractions off each side, rescale back to the original size.

    Boxes are clipped to the window; those keeping less than ``min_keep`` of
    their original area are dropped.
    """
    h, w = sample.height, sample.width
    x0, y0 = int(round(left * w)), int(round(top * h))
    x1, y1 = w - int(round(right * w)), h - int(round(bottom * h))
    if x1 - x0 < 1 or y1 - y0 < 1:
        return sample
    window = sample.image[y0:y1, x0:x1]
    image = to_uint8(bilinear_resize(window, h, w))
    boxes = sample.boxes.copy()
    orig_area = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    boxes[:, 0::2] = np.clip(boxes[:, 0::2], x0, x1) - x0
    boxes[:, 1::2] = np.clip(boxes[:, 1::2], y0, y1) - y0
    kept_area = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    keep = kept_area >= min_keep * orig_area
    keep &= kept_area > 0
    sx, sy = w / (x1 - x0), h / (y1 - y0)
    boxes = boxes[keep] * np.array([sx, sy, sx, sy])
    return Sample(image, clip_to_image(boxes, w, h), sample.labels[keep].copy(), sample.image_id, sample.source_path)


def adjust_brightness(image: np.ndarray, gain: float) -> np.ndarray:
    return to_uint8(image.astype(np.float64) * gain)


def adjust_exposure(image: np.ndarray, gamma: float) -> np.ndarray:
    return to_uint8(255.0 * (image.astype(np.float64) / 255.0) ** gamma)


def augment(sample: Sample, cfg: AugmentationConfig, rng: SplitMix64) -> Sample:
    """Flips, per-side crop, brightness gain and gamma exposure, drawn from ``rng``."""
    cfg.validate()
    if rng.random() < cfg.hflip_p:
        sample = hflip(sample)
    if rng.random() < cfg.vflip_p:
        sample = vflip(sample)
    if cfg.crop_max_frac > 0:
        fracs = [rng.uniform(0.0, cfg.crop_max_frac) for _ in range(4)]
        sample = crop(sample, *fracs, min_keep=cfg.min_box_keep)
    gain = rng.uniform(*cfg.brightness_range)
    gamma = rng.uniform(*cfg.exposure_range)
    image = adjust_exposure(adjust_brightness(sample.image, gain), gamma)
    return Sample(image, sample.boxes, sample.labels, sample.image_id, sample.source_path)


def normalize(image: np.ndarray) -> np.ndarray:
    """uint8 HxWx3 -> float [3, H, W], scaled to [0, 1] then standardised per channel."""
    x = image.astype(np.float64) / 255.0
    x = (x - MEAN) / STD
    return np.ascontiguousarray(x.transpose(2, 0, 1))
