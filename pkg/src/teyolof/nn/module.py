"""Module tree, parameter registry and the primitive layers."""

from __future__ import annotations

import math
from collections import OrderedDict
from typing import Iterator

import numpy as np

from ..autograd import Tensor, activation, batchnorm2d, conv2d, conv_output_size
from ..errors import ConfigError


class Module:
    """Base class: tracks child modules, trainable tensors and non-trainable buffers."""

    def __init__(self):
        object.__setattr__(self, "_modules", OrderedDict())
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Module):
            self._modules[name] = value
        elif isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def children(self) -> Iterator["Module"]:
        return iter(self._modules.values())

    def named_modules(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix, self
        for name, child in self._modules.items():
            yield from child.named_modules(f"{prefix}.{name}" if prefix else name)

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for mod_name, mod in self.named_modules():
            for name, p in mod._params.items():
                yield (f"{mod_name}.{name}" if mod_name else name), p

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        for mod_name, mod in self.named_modules():
            for name, b in mod._buffers.items():
                yield (f"{mod_name}.{name}" if mod_name else name), b

    def train(self, mode: bool = True) -> "Module":
        for _, mod in self.named_modules():
            object.__setattr__(mod, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())
        state.update((name, b.copy()) for name, b in self.named_buffers())
        return state

    def load_state_dict(self, state) -> None:
        targets = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        missing = (set(targets) | set(buffers)) - set(state)
        unexpected = set(state) - set(targets) - set(buffers)
        if missing or unexpected:
            raise ConfigError(f"state mismatch: missing={sorted(missing)[:5]} unexpected={sorted(unexpected)[:5]}")
        for name, arr in state.items():
            dst = targets[name].data if name in targets else buffers[name]
            if dst.shape != arr.shape:
                raise ConfigError(f"shape mismatch for {name}: {dst.shape} vs {arr.shape}")
            dst[...] = arr

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape this module maps ``shape`` to, without running it."""
        for child in self.children():
            shape = child.output_shape(shape)
        return shape

    def macs(self, shape: tuple[int, ...]) -> int:
        """Multiply-accumulates of a forward pass on ``shape``."""
        total = 0
        for child in self.children():
            total += child.macs(shape)
            shape = child.output_shape(shape)
        return total


def _param(shape, rng: np.random.Generator, std: float) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel: int = 1, stride: int = 1,
                 padding: int | None = None, dilation: int = 1, groups: int = 1, bias: bool = False,
                 rng: np.random.Generator | None = None, init_std: float | None = None):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise ConfigError(f"channels {in_channels}->{out_channels} not divisible by groups {groups}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel, self.stride, self.dilation, self.groups = kernel, stride, dilation, groups
        self.padding = dilation * (kernel - 1) // 2 if padding is None else padding
        fan_out = out_channels // groups * kernel * kernel
        std = math.sqrt(2.0 / fan_out) if init_std is None else init_std
        self.weight = _param((out_channels, in_channels // groups, kernel, kernel), rng, std)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.in_channels:
            raise ConfigError(f"conv expects {self.in_channels} input channels, got {x.shape[1]}")
        return conv2d(x, self.weight, self.bias, self.stride, self.padding, self.dilation, self.groups)

    def output_shape(self, shape):
        n, _, h, w = shape
        return (n, self.out_channels,
                conv_output_size(h, self.kernel, self.stride, self.padding, self.dilation),
                conv_output_size(w, self.kernel, self.stride, self.padding, self.dilation))

    def macs(self, shape):
        n, _, ho, wo = self.output_shape(shape)
        per_output = self.in_channels // self.groups * self.kernel * self.kernel
        return n * self.out_channels * ho * wo * per_output


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.scale = Tensor(np.ones(channels), requires_grad=True)
        self.shift = Tensor(np.zeros(channels), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(channels))
        self.register_buffer("running_var", np.ones(channels))

    def forward(self, x: Tensor) -> Tensor:
        return batchnorm2d(x, self.scale, self.shift, self.running_mean, self.running_var,
                           self.training, self.momentum, self.eps)

    def macs(self, shape):
        return 0


class Activation(Module):
    def __init__(self, kind: str):
        super().__init__()
        self.kind = kind

    def forward(self, x: Tensor) -> Tensor:
        return activation(x, self.kind)

    def macs(self, shape):
        return 0


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        for i, layer in enumerate(layers):
            setattr(self, str(i), layer)

    def __iter__(self):
        return iter(self._modules.values())

    def __len__(self):
        return len(self._modules)

    def __getitem__(self, i: int) -> Module:
        return list(self._modules.values())[i]

    def forward(self, x: Tensor) -> Tensor:
        for layer in self._modules.values():
            x = layer(x)
        return x
