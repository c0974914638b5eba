"""Seeded train/val/test split and its manifest format."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError
from .rng import SplitMix64

SUBSETS = ("train", "val", "test")


@dataclass
class DatasetSplit:
    train: list[int]
    val: list[int]
    test: list[int]
    ratios: tuple[float, ...] = (0.7, 0.2, 0.1)
    seed: int = 0

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def subsets(self) -> dict[str, list[int]]:
        return {"train": self.train, "val": self.val, "test": self.test}


def split_sizes(n: int, ratios) -> list[int]:
    """Part sizes from floored cumulative boundaries; the last part takes the remainder."""
    total = 0.0
    bounds = []
    for r in ratios[:-1]:
        total += r
        bounds.append(math.floor(n * total + 1e-9))
    bounds = [0] + bounds + [n]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def split_dataset(ids, ratios=(0.7, 0.2, 0.1), seed: int = 0) -> DatasetSplit:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise DataError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    ids = list(ids)
    if len(ids) < len(ratios):
        raise DataError(f"need at least {len(ratios)} ids to split, got {len(ids)}")
    SplitMix64(seed).shuffle(ids)
    sizes = split_sizes(len(ids), ratios)
    a, b = sizes[0], sizes[0] + sizes[1]
    return DatasetSplit(ids[:a], ids[a:b], ids[b:], ratios, seed)


def write_manifest(path, split: DatasetSplit) -> None:
    lines = [f"{iid}\t{name}" for name, ids in split.subsets().items() for iid in ids]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> DatasetSplit:
    parts: dict[str, list[int]] = {name: [] for name in SUBSETS}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            iid, name = line.split("\t")
            parts[name.strip()].append(int(iid))
        except (ValueError, KeyError):
            raise DataError(f"{path}:{lineno}: expected '<image_id>\\t<train|val|test>'") from None
    return DatasetSplit(parts["train"], parts["val"], parts["test"])
