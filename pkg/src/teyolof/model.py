"""Backbone, dilated encoder and decoder heads assembled into the full detector."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, broadcast_to, mul, ops, sigmoid
from .config import TEYOLOFConfig, compound_scale
from .errors import ConfigError, UsageError
from .nn import Conv2d, ConvBNAct, DilatedResidualBlock, DSConvModule, Module, Projector, Sequential

CLS_PRIOR = 0.01


class Backbone(Module):
    """Stride-32 stack of depthwise separable stages ("MicroEffNet").

    stem 3x3/2 conv -> stages of DS modules (first block of each stage carries
    the stage stride) -> 1x1 expansion to the head width.
    """

    def __init__(self, cfg, d: float = 1.0, w: float = 1.0, act: str = "mish", rng=None):
        super().__init__()
        dims = cfg.scaled(d, w)
        self.depths, self.widths = dims["depths"], dims["widths"]
        self.out_channels = dims["head_width"]
        self.stem = ConvBNAct(3, dims["stem_width"], 3, stride=cfg.stem_stride, act=act, rng=rng)
        blocks = []
        cin = dims["stem_width"]
        for depth, width, stride in zip(self.depths, self.widths, cfg.stage_strides):
            for i in range(depth):
                blocks.append(DSConvModule(cin, width, 3, stride=stride if i == 0 else 1, act=act, rng=rng))
                cin = width
        self.stages = Sequential(*blocks)
        self.head = ConvBNAct(cin, self.out_channels, 1, act=act, rng=rng)

    @property
    def num_blocks(self) -> int:
        return len(self.stages)

    def forward(self, x: Tensor) -> Tensor:
        return self.head(self.stages(self.stem(x)))


def build_backbone(cfg, scaling=None, act: str = "mish", rng=None) -> Backbone:
    d, w = (1.0, 1.0) if scaling is None else compound_scale(scaling)[:2]
    return Backbone(cfg, d, w, act=act, rng=rng)


class DilatedEncoder(Module):
    """Projector followed by residual blocks of increasing dilation."""

    def __init__(self, in_channels: int, channels: int = 512, dilations=(2, 4, 6, 8), act="mish", rng=None):
        super().__init__()
        self.in_channels, self.channels = in_channels, channels
        self.projector = Projector(in_channels, channels, rng=rng)
        self.blocks = Sequential(*[DilatedResidualBlock(channels, d, act=act, rng=rng) for d in dilations])

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.in_channels:
            raise ConfigError(f"encoder expects {self.in_channels} channels, got {x.shape[1]}")
        return self.blocks(self.projector(x))


@dataclass
class ModelOutput:
    cls_logits: Tensor  # [N, A*K, Hf, Wf]
    reg_deltas: Tensor  # [N, A*4, Hf, Wf]
    obj_logits: Tensor  # [N, A, Hf, Wf]


class Decoder(Module):
    """Parallel heads: classification (2 DS modules) and regression + objectness (4 DS modules)."""

    def __init__(self, channels: int, num_anchors: int, num_classes: int, cls_depth: int = 2,
                 reg_depth: int = 4, act: str = "mish", rng=None):
        super().__init__()
        self.channels, self.num_anchors, self.num_classes = channels, num_anchors, num_classes
        self.cls_head = Sequential(*[DSConvModule(channels, channels, 3, act=act, rng=rng) for _ in range(cls_depth)])
        self.reg_head = Sequential(*[DSConvModule(channels, channels, 3, act=act, rng=rng) for _ in range(reg_depth)])
        self.cls_pred = Conv2d(channels, num_anchors * num_classes, 1, bias=True, rng=rng, init_std=0.01)
        self.reg_pred = Conv2d(channels, num_anchors * 4, 1, bias=True, rng=rng, init_std=0.01)
        self.obj_pred = Conv2d(channels, num_anchors, 1, bias=True, rng=rng, init_std=0.01)
        self.cls_pred.bias.data[...] = -math.log((1.0 - CLS_PRIOR) / CLS_PRIOR)

    def forward(self, p5: Tensor) -> ModelOutput:
        if p5.shape[1] != self.channels:
            raise ConfigError(f"decoder expects {self.channels} channels, got {p5.shape[1]}")
        cls_feat = self.cls_head(p5)
        reg_feat = self.reg_head(p5)
        return ModelOutput(self.cls_pred(cls_feat), self.reg_pred(reg_feat), self.obj_pred(reg_feat))

    def output_shape(self, shape):
        return self.cls_pred.output_shape(shape)

    def macs(self, shape):
        total = sum(m.macs(shape) for m in (*self.cls_head, *self.reg_head))
        return total + sum(m.macs(shape) for m in (self.cls_pred, self.reg_pred, self.obj_pred))


class TEYOLOF(Module):
    def __init__(self, cfg: TEYOLOFConfig | None = None, seed: int = 0):
        super().__init__()
        cfg = cfg or TEYOLOFConfig()
        cfg.validate()
        object.__setattr__(self, "cfg", cfg)
        rng = np.random.default_rng(seed)
        self.backbone = build_backbone(cfg.backbone, cfg.scaling, act=cfg.activation, rng=rng)
        self.encoder = DilatedEncoder(self.backbone.out_channels, cfg.encoder_channels,
                                      cfg.encoder_dilations, act=cfg.activation, rng=rng)
        self.decoder = Decoder(cfg.encoder_channels, cfg.num_anchors, cfg.num_classes,
                               cfg.cls_head_depth, cfg.reg_head_depth, act=cfg.activation, rng=rng)

    def features(self, images: Tensor) -> Tensor:
        return self.encoder(self.backbone(images))

    def forward(self, images: Tensor) -> ModelOutput:
        if images.ndim != 4 or images.shape[1] != 3:
            raise UsageError(f"images must be [N,3,R,R], got {images.shape}")
        if images.shape[2] % 32 or images.shape[3] % 32:
            raise UsageError(f"input size {images.shape[2]}x{images.shape[3]} is not divisible by 32")
        return self.decoder(self.features(images))

    def output_shape(self, shape):
        n, _, h, w = shape
        return (n, self.cfg.num_anchors * self.cfg.num_classes, h // 32, w // 32)


def fuse_scores(cls_logits: Tensor, obj_logits: Tensor, num_classes: int) -> Tensor:
    """Final class scores ``sigmoid(cls) * sigmoid(obj)`` shaped [N, A, K, Hf, Wf]."""
    n, ak, h, w = cls_logits.shape
    a = obj_logits.shape[1]
    if ak != a * num_classes or obj_logits.shape != (n, a, h, w):
        raise ConfigError(f"cannot fuse cls {cls_logits.shape} with obj {obj_logits.shape} for {num_classes} classes")
    cls = sigmoid(cls_logits.reshape(n, a, num_classes, h, w))
    obj = broadcast_to(sigmoid(obj_logits.reshape(n, a, 1, h, w)), (n, a, num_classes, h, w))
    return mul(cls, obj)


def fuse_log_scores(cls_logits: Tensor, obj_logits: Tensor, num_classes: int) -> Tensor:
    """``log(sigmoid(cls) * sigmoid(obj))`` without forming the product."""
    n, ak, h, w = cls_logits.shape
    a = obj_logits.shape[1]
    cls = ops.log_sigmoid(cls_logits.reshape(n, a, num_classes, h, w))
    obj = broadcast_to(ops.log_sigmoid(obj_logits.reshape(n, a, 1, h, w)), (n, a, num_classes, h, w))
    return cls + obj
