from .anchors import generate_anchors
from .boxes import (
    Box,
    Detection,
    clip_boxes,
    decode_deltas,
    encode_deltas,
    from_cxcywh,
    giou,
    iou,
    pairwise_iou,
    to_cxcywh,
)
from .losses import LossConfig, detection_loss, focal_loss, giou_loss, giou_loss_box
from .matching import IGNORE, NEGATIVE, MatchResult, uniform_match
from .nms import nms, nms_indices
from .postprocess import PostprocessConfig, format_detection_lines, postprocess, to_coco_results

__all__ = [
    "Box", "Detection", "IGNORE", "LossConfig", "MatchResult", "NEGATIVE", "PostprocessConfig",
    "clip_boxes", "decode_deltas", "detection_loss", "encode_deltas", "focal_loss",
    "format_detection_lines", "from_cxcywh", "generate_anchors", "giou", "giou_loss",
    "giou_loss_box", "iou", "nms", "nms_indices", "pairwise_iou", "postprocess",
    "to_coco_results", "to_cxcywh", "uniform_match",
]
