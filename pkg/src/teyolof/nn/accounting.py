"""Parameter and FLOP accounting."""

from __future__ import annotations

from .module import Module


def param_count(module: Module) -> int:
    """Number of trainable scalars (BN running statistics excluded)."""
    return int(sum(p.size for p in module.parameters()))


def buffer_count(module: Module) -> int:
    return int(sum(b.size for _, b in module.named_buffers()))


def flops_estimate(module: Module, input_shape) -> int:
    """Convolution FLOPs of one forward pass, counted as 2 x multiply-accumulates."""
    return 2 * int(module.macs(tuple(input_shape)))


def standard_conv_params(n_in: int, n_out: int, kernel: int) -> int:
    return n_in * kernel * kernel * n_out


def ds_conv_params(n_in: int, n_out: int, kernel: int) -> int:
    return n_in * kernel * kernel + n_in * n_out
