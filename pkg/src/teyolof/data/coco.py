"""COCO-format annotation JSON."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from .records import CLASSES, AnnotationSet, ImageEntry


def _num(v: float):
    v = float(v)
    return int(v) if v.is_integer() else v


def to_coco_dict(dataset: AnnotationSet) -> dict:
    images, annotations = [], []
    ann_id = 1
    for e in dataset.images:
        images.append({"id": int(e.image_id), "file_name": e.file_name,
                       "width": int(e.width), "height": int(e.height)})
        for box, label in zip(e.boxes, e.labels):
            x1, y1, x2, y2 = (float(v) for v in box)
            w, h = x2 - x1, y2 - y1
            annotations.append({"id": ann_id, "image_id": int(e.image_id), "category_id": int(label) + 1,
                                "bbox": [_num(x1), _num(y1), _num(w), _num(h)],
                                "area": _num(w * h), "iscrowd": 0})
            ann_id += 1
    categories = [{"id": i + 1, "name": name} for i, name in enumerate(CLASSES)]
    return {"images": images, "annotations": annotations, "categories": categories}


def dumps(dataset: AnnotationSet) -> str:
    return json.dumps(to_coco_dict(dataset), indent=2, ensure_ascii=False) + "\n"


def write_coco_json(path, dataset: AnnotationSet) -> None:
    Path(path).write_text(dumps(dataset), encoding="utf-8")


def from_coco_dict(obj: dict) -> AnnotationSet:
    for key in ("images", "annotations", "categories"):
        if key not in obj:
            raise DataError(f"COCO JSON missing top-level key {key!r}")
    cat_to_label = {}
    for cat in obj["categories"]:
        name = cat["name"]
        if name not in CLASSES:
            raise DataError(f"unknown category {name!r}")
        cat_to_label[int(cat["id"])] = CLASSES.index(name)
    per_image: dict[int, tuple[list, list]] = {}
    entries = []
    for img in obj["images"]:
        try:
            iid = int(img["id"])
            entries.append((iid, img["file_name"], int(img["width"]), int(img["height"])))
        except KeyError as exc:
            raise DataError(f"image record missing {exc}") from None
        per_image[iid] = ([], [])
    for ann in obj["annotations"]:
        try:
            iid, cat, bbox = int(ann["image_id"]), int(ann["category_id"]), ann["bbox"]
        except KeyError as exc:
            raise DataError(f"annotation record missing {exc}") from None
        if iid not in per_image:
            raise DataError(f"annotation {ann.get('id')} refers to unknown image {iid}")
        if cat not in cat_to_label:
            raise DataError(f"annotation {ann.get('id')} has unknown category {cat}")
        x, y, w, h = (float(v) for v in bbox)
        if w < 0 or h < 0:
            raise DataError(f"annotation {ann.get('id')} has negative bbox size")
        per_image[iid][0].append([x, y, x + w, y + h])
        per_image[iid][1].append(cat_to_label[cat])
    images = [ImageEntry(iid, fname, w, h, np.asarray(per_image[iid][0], dtype=np.float64).reshape(-1, 4),
                         per_image[iid][1]) for iid, fname, w, h in entries]
    return AnnotationSet(images)


def read_coco_json(path) -> AnnotationSet:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    return from_coco_dict(obj)
