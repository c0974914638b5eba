"""Dataset ingestion, splitting, augmentation and synthetic data."""

from .coco import dumps as coco_dumps
from .coco import from_coco_dict, read_coco_json, to_coco_dict, write_coco_json
from .loader import Batch, epoch_batches, load_samples, make_batch, num_batches, prepare, save_samples
from .ppm import decode_ppm, encode_ppm, read_ppm, write_ppm
from .records import CLASSES, AnnotationSet, ImageEntry, Sample, class_index
from .rng import SplitMix64
from .split import DatasetSplit, read_manifest, split_dataset, split_sizes, write_manifest
from .synth import synth_generate, to_annotations
from .transforms import AugmentationConfig, augment, hflip, normalize, resize_to, vflip
from .voc import parse_voc_xml, voc_to_annotations

__all__ = [
    "CLASSES", "AnnotationSet", "AugmentationConfig", "Batch", "DatasetSplit", "ImageEntry", "Sample",
    "SplitMix64", "augment", "class_index", "coco_dumps", "decode_ppm", "encode_ppm", "epoch_batches",
    "from_coco_dict", "hflip", "load_samples", "make_batch", "normalize", "num_batches", "parse_voc_xml",
    "prepare", "read_coco_json", "read_manifest", "read_ppm", "resize_to", "save_samples", "split_dataset",
    "split_sizes", "synth_generate", "to_annotations", "to_coco_dict", "vflip", "voc_to_annotations",
    "write_coco_json", "write_manifest", "write_ppm",
]
