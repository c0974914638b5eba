"""In-memory dataset records and the class/category mapping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

# class index -> name; COCO category id is index + 1
CLASSES = ("Platelets", "RBC", "WBC")


def class_index(name: str) -> int:
    key = name.strip().lower()
    for i, cls in enumerate(CLASSES):
        if cls.lower() == key:
            return i
    raise DataError(f"unknown class name {name!r}; expected one of {', '.join(CLASSES)}")


def _boxes(b) -> np.ndarray:
    return np.asarray(b, dtype=np.float64).reshape(-1, 4)


@dataclass
class ImageEntry:
    """Annotation record for one image (no pixels)."""

    image_id: int
    file_name: str
    width: int
    height: int
    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        self.boxes = _boxes(self.boxes)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.boxes) != len(self.labels):
            raise DataError(f"image {self.image_id}: {len(self.boxes)} boxes but {len(self.labels)} labels")

    def __eq__(self, other):
        if not isinstance(other, ImageEntry):
            return NotImplemented
        return (self.image_id == other.image_id and self.file_name == other.file_name
                and self.width == other.width and self.height == other.height
                and np.array_equal(self.boxes, other.boxes) and np.array_equal(self.labels, other.labels))


@dataclass
class AnnotationSet:
    images: list[ImageEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.images)

    def by_id(self) -> dict[int, ImageEntry]:
        return {e.image_id: e for e in self.images}

    def object_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(CLASSES, 0)
        for e in self.images:
            for lab in e.labels:
                counts[CLASSES[lab]] += 1
        return counts


@dataclass
class Sample:
    """One image (H x W x 3, uint8) with its ground truth."""

    image: np.ndarray
    boxes: np.ndarray
    labels: np.ndarray
    image_id: int = 0
    source_path: str = ""

    def __post_init__(self):
        self.boxes = _boxes(self.boxes)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    def entry(self, file_name: str | None = None) -> ImageEntry:
        return ImageEntry(self.image_id, file_name or self.source_path, self.width, self.height,
                          self.boxes.copy(), self.labels.copy())
