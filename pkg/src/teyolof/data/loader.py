"""Datasets on disk and deterministic mini-batching."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .coco import read_coco_json, write_coco_json
from .ppm import read_ppm, write_ppm
from .records import AnnotationSet, Sample
from .rng import SplitMix64
from .transforms import AugmentationConfig, augment, normalize, resize_to


def load_samples(annotations, image_dir) -> list[Sample]:
    """Pair a COCO annotation file (or set) with the PPM images it names."""
    if not isinstance(annotations, AnnotationSet):
        annotations = read_coco_json(annotations)
    image_dir = Path(image_dir)
    samples = []
    for e in annotations.images:
        path = image_dir / e.file_name
        if not path.exists():
            raise DataError(f"image file {path} listed in annotations does not exist")
        image = read_ppm(path)
        if image.shape[:2] != (e.height, e.width):
            raise DataError(f"{path}: size {image.shape[1]}x{image.shape[0]} disagrees with "
                            f"annotation {e.width}x{e.height}")
        samples.append(Sample(image, e.boxes, e.labels, e.image_id, str(path)))
    return samples


def save_samples(samples: list[Sample], out_dir, json_name: str = "annotations.json") -> Path:
    """Write each image as PPM plus one COCO JSON; returns the JSON path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in samples:
        name = Path(s.source_path).name or f"{s.image_id:05d}.ppm"
        write_ppm(out_dir / name, s.image)
        entries.append(s.entry(name))
    path = out_dir / json_name
    write_coco_json(path, AnnotationSet(entries))
    return path


@dataclass
class Batch:
    images: np.ndarray  # [N, 3, R, R] normalised
    targets: list[tuple[np.ndarray, np.ndarray]]
    image_ids: list[int]


def make_batch(samples: list[Sample]) -> Batch:
    images = np.stack([normalize(s.image) for s in samples])
    return Batch(images, [(s.boxes, s.labels) for s in samples], [s.image_id for s in samples])


def num_batches(n: int, batch_size: int) -> int:
    return math.ceil(n / batch_size)


def epoch_batches(samples: list[Sample], batch_size: int, seed: int, epoch: int,
                  aug: AugmentationConfig | None = None, shuffle: bool = True):
    """Yield the batches of one epoch.

    Order and augmentation draws come from substreams of (seed, epoch) and
    (seed, epoch, image_id), so batch i is fixed for a given seed and epoch.
    """
    order = list(range(len(samples)))
    if shuffle:
        SplitMix64.derive(seed, epoch).shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = []
        for idx in order[start:start + batch_size]:
            s = samples[idx]
            if aug is not None:
                s = augment(s, aug, SplitMix64.derive(aug.seed ^ seed, epoch, s.image_id))
            chunk.append(s)
        yield make_batch(chunk)


def prepare(samples: list[Sample], size: int) -> list[Sample]:
    return [resize_to(s, size) for s in samples]
