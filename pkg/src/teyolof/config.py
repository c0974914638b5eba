"""Architecture configuration, compound scaling and the plain-text config format."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

CONSTRAINT_BAND = (1.8, 2.2)


@dataclass
class ScalingCoefficients:
    """Depth/width/resolution bases and the user coefficient ``phi``."""

    alpha: float = 1.2
    beta: float = 1.1
    gamma: float = 1.15
    phi: float = 0.0

    @property
    def constraint_value(self) -> float:
        return self.alpha * self.beta ** 2 * self.gamma ** 2

    def validate(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 1.0:
                raise ConfigError(f"scaling base {name}={getattr(self, name)} must be >= 1")
        lo, hi = CONSTRAINT_BAND
        if not lo <= self.constraint_value <= hi:
            warnings.warn(f"alpha*beta^2*gamma^2 = {self.constraint_value:.5f} is outside [{lo}, {hi}]",
                          stacklevel=3)


def compound_scale(c: ScalingCoefficients) -> tuple[float, float, float]:
    """Return the (depth, width, resolution) multipliers ``(alpha^phi, beta^phi, gamma^phi)``."""
    c.validate()
    return c.alpha ** c.phi, c.beta ** c.phi, c.gamma ** c.phi


def round8(x: float) -> int:
    """Nearest positive multiple of 8 (halves round up), never below 8."""
    return max(8, int(math.floor(x / 8.0 + 0.5)) * 8)


def scaled_depth(base: int, d: float) -> int:
    # tolerance keeps exact products such as 2 * 1.0 from ceiling upwards
    return int(math.ceil(base * d - 1e-9))


@dataclass
class BackboneConfig:
    stage_base_depths: tuple[int, ...] = (1, 2, 2, 3, 1)
    stage_base_widths: tuple[int, ...] = (16, 24, 48, 96, 192)
    stage_strides: tuple[int, ...] = (1, 2, 2, 2, 2)
    stem_width: int = 16
    stem_stride: int = 2
    head_width: int = 320

    def validate(self) -> None:
        n = len(self.stage_base_depths)
        if not (len(self.stage_base_widths) == len(self.stage_strides) == n) or n == 0:
            raise ConfigError("stage depth/width/stride lists must be non-empty and equally long")
        if math.prod(self.stage_strides) * self.stem_stride != 32:
            raise ConfigError(f"total backbone stride {math.prod(self.stage_strides) * self.stem_stride} != 32")
        if any(v <= 0 for v in (*self.stage_base_depths, *self.stage_base_widths, self.stem_width, self.head_width)):
            raise ConfigError("backbone depths and widths must be positive")

    def scaled(self, d: float, w: float) -> dict:
        """Per-stage depths/widths and stem/head widths after applying (d, w)."""
        self.validate()
        depths = [scaled_depth(b, d) for b in self.stage_base_depths]
        widths = [round8(b * w) for b in self.stage_base_widths]
        if any(v <= 0 for v in depths):
            raise ConfigError(f"non-positive scaled depth in {depths}")
        return {"depths": depths, "widths": widths, "stem_width": round8(self.stem_width * w),
                "head_width": round8(self.head_width * w)}


@dataclass
class TEYOLOFConfig:
    scaling: ScalingCoefficients = field(default_factory=ScalingCoefficients)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    encoder_channels: int = 512
    encoder_dilations: tuple[int, ...] = (2, 4, 6, 8)
    reg_head_depth: int = 4
    cls_head_depth: int = 2
    num_classes: int = 3
    anchor_sizes: tuple[float, ...] = (32.0, 64.0, 128.0, 256.0, 512.0)
    base_resolution: int = 416
    input_resolution: int | None = None  # None: derive from base_resolution and gamma^phi
    activation: str = "mish"

    @property
    def num_anchors(self) -> int:
        return len(self.anchor_sizes)

    @property
    def resolution(self) -> int:
        if self.input_resolution is not None:
            r = int(self.input_resolution)
        else:
            _, _, rmul = compound_scale(self.scaling)
            r = int(math.ceil(self.base_resolution * rmul / 32.0 - 1e-9)) * 32
        if r % 32 or r <= 0:
            raise ConfigError(f"input resolution {r} must be a positive multiple of 32")
        return r

    def scaled_anchor_sizes(self) -> list[float]:
        f = self.resolution / self.base_resolution
        return [s * f for s in self.anchor_sizes]

    def validate(self) -> None:
        self.scaling.validate()
        self.backbone.validate()
        if self.encoder_channels % 4:
            raise ConfigError("encoder_channels must be divisible by 4")
        if self.num_classes < 1 or not self.anchor_sizes:
            raise ConfigError("need at least one class and one anchor size")
        if self.activation not in ("relu", "mish", "swish"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        _ = self.resolution


# -- plain-text config ------------------------------------------------------

_SECTIONS = {"scaling": ScalingCoefficients, "backbone": BackboneConfig}


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, (tuple, list)):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw: str, template):
    raw = raw.strip()
    if isinstance(template, tuple):
        items = [s for s in (p.strip() for p in raw.split(",")) if s]
        kind = type(template[0]) if template else float
        return tuple(kind(s) for s in items)
    if isinstance(template, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(template, int):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    return raw


def config_to_text(cfg: TEYOLOFConfig) -> str:
    lines = ["# teyolof model configuration (key = value; lists comma separated)"]
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            for sub in fields(value):
                lines.append(f"{f.name}.{sub.name} = {_format(getattr(value, sub.name))}")
        else:
            lines.append(f"{f.name} = {_format(value)}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> TEYOLOFConfig:
    cfg = TEYOLOFConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        target, name = cfg, key
        if "." in key:
            section, name = key.split(".", 1)
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section {section!r}")
            target = getattr(cfg, section)
        if not hasattr(target, name) or name in _SECTIONS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if name == "input_resolution":
                value = None if raw.lower() in ("auto", "none", "") else int(raw)
            else:
                value = _parse(raw, getattr(type(target)(), name))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
        setattr(target, name, value)
    return cfg


def save_config(path, cfg: TEYOLOFConfig) -> None:
    Path(path).write_text(config_to_text(cfg), encoding="utf-8")


def load_config(path) -> TEYOLOFConfig:
    return config_from_text(Path(path).read_text(encoding="utf-8"))
