"""Pascal VOC XML annotations (as shipped with BCCD)."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path

from ..errors import DataError
from .records import AnnotationSet, ImageEntry, class_index


def _text(node, tag, path):
    child = node.find(tag)
    if child is None or child.text is None or not child.text.strip():
        raise DataError(f"{path}: missing <{tag}>")
    return child.text.strip()


def _number(node, tag, path) -> float:
    raw = _text(node, tag, path)
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"{path}: <{tag}> is not a number: {raw!r}") from None


def parse_voc_xml(path, image_id: int = 0) -> ImageEntry:
    """Read one VOC file; 1-based inclusive pixel coords become 0-based ``[x1, y1, x2, y2]``."""
    try:
        root = ET.parse(path).getroot()
    except (ET.ParseError, OSError) as exc:
        raise DataError(f"{path}: cannot parse XML: {exc}") from None
    filename = root.findtext("filename", default=Path(path).with_suffix(".jpg").name).strip()
    size = root.find("size")
    width = int(_number(size, "width", path)) if size is not None else 0
    height = int(_number(size, "height", path)) if size is not None else 0
    boxes, labels = [], []
    for obj in root.findall("object"):
        label = class_index(_text(obj, "name", path))
        bb = obj.find("bndbox")
        if bb is None:
            raise DataError(f"{path}: object without <bndbox>")
        x1, y1, x2, y2 = (_number(bb, t, path) for t in ("xmin", "ymin", "xmax", "ymax"))
        if x2 <= x1 or y2 <= y1:
            raise DataError(f"{path}: degenerate box ({x1}, {y1}, {x2}, {y2})")
        boxes.append([x1 - 1, y1 - 1, x2 - 1, y2 - 1])
        labels.append(label)
    return ImageEntry(image_id, filename, width, height, boxes, labels)


def voc_to_annotations(paths) -> AnnotationSet:
    """Parse VOC files in sorted path order, numbering images from 1."""
    paths = sorted(Path(p) for p in paths)
    return AnnotationSet([parse_voc_xml(p, i) for i, p in enumerate(paths, 1)])
