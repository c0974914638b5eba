"""Composite layers: conv-BN-activation, depthwise separable module, dilated residual block, projector."""

from __future__ import annotations

import numpy as np

from ..autograd import Tensor
from ..errors import ConfigError
from .module import Activation, BatchNorm2d, Conv2d, Module


class ConvBNAct(Module):
    """Bias-free convolution followed by batch norm and an optional activation."""

    def __init__(self, in_channels, out_channels, kernel=1, stride=1, dilation=1, groups=1,
                 act: str | None = "mish", rng=None):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, kernel, stride=stride, dilation=dilation,
                           groups=groups, rng=rng)
        self.bn = BatchNorm2d(out_channels)
        if act is not None:
            self.act = Activation(act)

    def forward(self, x: Tensor) -> Tensor:
        y = self.bn(self.conv(x))
        return self.act(y) if "act" in self._modules else y


class DSConvModule(Module):
    """Depthwise kxk -> BN -> act -> pointwise 1x1 -> BN -> act.

    ``stride`` is applied by the depthwise convolution, which is how the
    backbone downsamples at the start of a stage.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3, stride: int = 1,
                 act: str = "mish", rng=None):
        super().__init__()
        self.in_channels, self.out_channels, self.kernel = in_channels, out_channels, kernel
        self.dw_conv = Conv2d(in_channels, in_channels, kernel, stride=stride, groups=in_channels, rng=rng)
        self.dw_bn = BatchNorm2d(in_channels)
        self.dw_act = Activation(act)
        self.pw_conv = Conv2d(in_channels, out_channels, 1, rng=rng)
        self.pw_bn = BatchNorm2d(out_channels)
        self.pw_act = Activation(act)

    def stages(self) -> list[Module]:
        return [self.dw_conv, self.dw_bn, self.dw_act, self.pw_conv, self.pw_bn, self.pw_act]

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ConfigError(f"DS module expects {self.in_channels} channels, got input {x.shape}")
        for stage in self.stages():
            x = stage(x)
        return x


class DilatedResidualBlock(Module):
    """Bottleneck residual: 1x1 reduce (rate 4) -> 3x3 dilated -> 1x1 restore, plus identity skip."""

    def __init__(self, channels: int = 512, dilation: int = 1, act: str = "mish", rng=None):
        super().__init__()
        if channels % 4:
            raise ConfigError(f"residual block channels {channels} must be divisible by 4")
        self.channels = channels
        self.mid_channels = channels // 4
        self.dilation = dilation
        self.reduce = ConvBNAct(channels, self.mid_channels, 1, act=act, rng=rng)
        self.dilated = ConvBNAct(self.mid_channels, self.mid_channels, 3, dilation=dilation, act=act, rng=rng)
        self.restore = ConvBNAct(self.mid_channels, channels, 1, act=act, rng=rng)

    def branch(self, x: Tensor) -> Tensor:
        return self.restore(self.dilated(self.reduce(x)))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ConfigError(f"residual block expects {self.channels} channels, got input {x.shape}")
        return x + self.branch(x)


class Projector(Module):
    """1x1 then 3x3 convolution, each followed by BN, mapping backbone channels to ``out_channels``."""

    def __init__(self, in_channels: int, out_channels: int = 512, rng=None):
        super().__init__()
        self.lateral = ConvBNAct(in_channels, out_channels, 1, act=None, rng=rng)
        self.fpn = ConvBNAct(out_channels, out_channels, 3, act=None, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fpn(self.lateral(x))


def zero_branch(block: DilatedResidualBlock) -> None:
    """Zero every conv weight in the residual branch (used to test the skip path)."""
    for _, mod in block.named_modules():
        if isinstance(mod, Conv2d):
            mod.weight.data[...] = 0.0
        if isinstance(mod, BatchNorm2d):
            mod.shift.data[...] = 0.0


def impulse_support(module: Module, channels: int, size: int, seed: int = 0) -> np.ndarray:
    """Boolean map of output positions that react to a centred input impulse.

    The module is run in inference mode on a zero background and on the same
    background plus an impulse; positions whose outputs differ are the
    receptive-field footprint.
    """
    from ..autograd import no_grad

    rng = np.random.default_rng(seed)
    x0 = np.zeros((1, channels, size, size))
    x1 = x0.copy()
    x1[0, :, size // 2, size // 2] = rng.normal(size=channels) + 3.0
    was_training = module.training
    module.eval()
    with no_grad():
        y0 = module(Tensor(x0)).data
        y1 = module(Tensor(x1)).data
    module.train(was_training)
    return np.any(np.abs(y1 - y0) > 1e-12, axis=(0, 1))
