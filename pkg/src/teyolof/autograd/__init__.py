"""Minimal reverse-mode autodiff over dense numpy arrays."""

from . import checkpoint, ops
from .conv import batchnorm2d, conv2d, conv_output_size
from .gradcheck import grad_check, numerical_gradient
from .ops import (
    activation,
    add,
    broadcast_to,
    clip,
    concat,
    div,
    exp,
    getitem,
    log,
    log_sigmoid,
    maximum,
    minimum,
    mish,
    mul,
    relu,
    reshape,
    scale,
    sigmoid,
    softplus,
    stack,
    swish,
    transpose,
)
from .tensor import (
    Tape,
    Tensor,
    as_tensor,
    backward,
    debug_mode,
    default_dtype,
    no_grad,
    set_default_dtype,
)

__all__ = [
    "Tape", "Tensor", "activation", "add", "as_tensor", "backward", "batchnorm2d",
    "broadcast_to", "checkpoint", "clip", "concat", "conv2d", "conv_output_size",
    "debug_mode", "default_dtype", "div", "exp", "getitem", "grad_check", "log",
    "log_sigmoid", "maximum", "minimum", "mish", "mul", "no_grad", "numerical_gradient",
    "ops", "relu", "reshape", "scale", "set_default_dtype", "sigmoid", "softplus",
    "stack", "swish", "transpose",
]
