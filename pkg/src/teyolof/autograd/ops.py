"""Differentiable elementwise, reduction and shape operations.

Broadcasting is deliberately limited: operands of binary ops must have equal
shapes, or one of them may be a per-channel vector ``[C]`` applied to an
``[N, C, ...]`` tensor. Anything else goes through :func:`broadcast_to`.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .tensor import Tensor, as_tensor, debug_enabled, make_result


def _channel_view(vec: np.ndarray, ndim: int) -> np.ndarray:
    return vec.reshape((1, -1) + (1,) * (ndim - 2))


def _reduce_channel(g: np.ndarray) -> np.ndarray:
    axes = (0,) + tuple(range(2, g.ndim))
    return g.sum(axis=axes)


def _binary_layout(a: Tensor, b: Tensor) -> str:
    """Return 'same', 'a_chan' (a is the channel vector) or 'b_chan'."""
    if a.shape == b.shape:
        return "same"
    if b.ndim == 1 and a.ndim >= 2 and a.shape[1] == b.shape[0]:
        return "b_chan"
    if a.ndim == 1 and b.ndim >= 2 and b.shape[1] == a.shape[0]:
        return "a_chan"
    raise ConfigError(f"incompatible shapes {a.shape} and {b.shape}: only equal shapes or per-channel vectors")


def _operands(a, b) -> tuple[Tensor, Tensor, np.ndarray, np.ndarray, str]:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        # a 0-d operand is promoted to the other's shape
        if a.ndim == 0 and b.ndim != 0:
            a = broadcast_to(a, b.shape)
        elif b.ndim == 0 and a.ndim != 0:
            b = broadcast_to(b, a.shape)
    layout = _binary_layout(a, b)
    ad, bd = a.data, b.data
    if layout == "b_chan":
        bd = _channel_view(bd, a.ndim)
    elif layout == "a_chan":
        ad = _channel_view(ad, b.ndim)
    return a, b, ad, bd, layout


def _fit(g: np.ndarray, layout: str, side: str) -> np.ndarray:
    if layout == side + "_chan":
        return _reduce_channel(g)
    return g


def add(a, b) -> Tensor:
    a, b, ad, bd, layout = _operands(a, b)

    def rule(g):
        return _fit(g, layout, "a"), _fit(g, layout, "b")

    return make_result(ad + bd, (a, b), "add", rule)


def sub(a, b) -> Tensor:
    a, b, ad, bd, layout = _operands(a, b)

    def rule(g):
        return _fit(g, layout, "a"), -_fit(g, layout, "b")

    return make_result(ad - bd, (a, b), "sub", rule)


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.ndim(b) == 0:
        return scale(as_tensor(a), float(b))
    if not isinstance(a, Tensor) and np.ndim(a) == 0:
        return scale(b, float(a))
    a, b, ad, bd, layout = _operands(a, b)

    def rule(g):
        return _fit(g * bd, layout, "a"), _fit(g * ad, layout, "b")

    return make_result(ad * bd, (a, b), "mul", rule)


def div(a, b) -> Tensor:
    a, b, ad, bd, layout = _operands(a, b)
    out = ad / bd

    def rule(g):
        return _fit(g / bd, layout, "a"), _fit(-g * out / bd, layout, "b")

    return make_result(out, (a, b), "div", rule)


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), "neg", lambda g: (-g,))


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a Python scalar."""
    return make_result(a.data * c, (a,), "scale", lambda g: (g * c,))


def add_scalar(a: Tensor, c: float) -> Tensor:
    return make_result(a.data + c, (a,), "add_scalar", lambda g: (g,))


def pow(a: Tensor, exponent: float) -> Tensor:
    x = a.data
    out = x ** exponent

    def rule(g):
        return (g * exponent * x ** (exponent - 1),)

    return make_result(out, (a,), "pow", rule)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_result(out, (a,), "exp", lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    x = a.data
    if debug_enabled() and np.any(x <= 0):
        raise FloatingPointError("log of a non-positive value")
    return make_result(np.log(x), (a,), "log", lambda g: (g / x,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form cannot overflow for either sign
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)
    return make_result(out, (a,), "sigmoid", lambda g: (g * out * (1.0 - out),))


def log_sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = -_softplus(-x)
    return make_result(out, (a,), "log_sigmoid", lambda g: (g * _sigmoid(-x),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return make_result(out, (a,), "tanh", lambda g: (g * (1.0 - out * out),))


def softplus(a: Tensor) -> Tensor:
    x = a.data
    return make_result(_softplus(x), (a,), "softplus", lambda g: (g * _sigmoid(x),))


def relu(a: Tensor) -> Tensor:
    x = a.data
    mask = x > 0
    return make_result(np.where(mask, x, 0.0), (a,), "relu", lambda g: (g * mask,))


def mish(a: Tensor) -> Tensor:
    x = a.data
    t = np.tanh(_softplus(x))
    out = x * t

    def rule(g):
        # d/dx x*tanh(sp(x)) = tanh(sp) + x * sech^2(sp) * sigmoid(x)
        return (g * (t + x * (1.0 - t * t) * _sigmoid(x)),)

    return make_result(out, (a,), "mish", rule)


def swish(a: Tensor) -> Tensor:
    x = a.data
    s = _sigmoid(x)
    out = x * s
    return make_result(out, (a,), "swish", lambda g: (g * (s + out * (1.0 - s)),))


ACTIVATIONS = {"relu": relu, "mish": mish, "swish": swish}


def activation(a: Tensor, kind: str) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ConfigError(f"unknown activation {kind!r}; expected one of {sorted(ACTIVATIONS)}") from None
    return fn(a)


def maximum(a, b) -> Tensor:
    """Elementwise max; ties send the gradient to ``a``."""
    a, b, ad, bd, layout = _operands(a, b)
    pick_a = ad >= bd

    def rule(g):
        return _fit(g * pick_a, layout, "a"), _fit(g * ~pick_a, layout, "b")

    return make_result(np.where(pick_a, ad, bd), (a, b), "maximum", rule)


def minimum(a, b) -> Tensor:
    """Elementwise min; ties send the gradient to ``a``."""
    a, b, ad, bd, layout = _operands(a, b)
    pick_a = ad <= bd

    def rule(g):
        return _fit(g * pick_a, layout, "a"), _fit(g * ~pick_a, layout, "b")

    return make_result(np.where(pick_a, ad, bd), (a, b), "minimum", rule)


def clip(a: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    x = a.data
    out = np.clip(x, lo, hi)
    inside = out == x
    return make_result(out, (a,), "clip", lambda g: (g * inside,))


# -- reductions ------------------------------------------------------------

def sum(a: Tensor, axis=None) -> Tensor:
    shape = a.shape
    out = a.data.sum(axis=axis)

    def rule(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return make_result(np.asarray(out), (a,), "sum", rule)


def mean(a: Tensor, axis=None) -> Tensor:
    n = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return scale(sum(a, axis), 1.0 / float(n))


# -- shape ops -------------------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    src = a.shape
    return make_result(a.data.reshape(shape), (a,), "reshape", lambda g: (g.reshape(src),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(a.data.transpose(axes), (a,), "transpose", lambda g: (g.transpose(inverse),))


def broadcast_to(a: Tensor, shape) -> Tensor:
    """Explicit numpy-style broadcast; the gradient is summed back to ``a.shape``."""
    src = a.shape
    out = np.broadcast_to(a.data, shape).copy()
    lead = len(shape) - len(src)

    def rule(g):
        g = g.sum(axis=tuple(range(lead))) if lead else g
        axes = tuple(i for i, n in enumerate(src) if n == 1 and g.shape[i] != 1)
        if axes:
            g = g.sum(axis=axes, keepdims=True)
        return (g,)

    return make_result(out, (a,), "broadcast_to", rule)


def getitem(a: Tensor, index) -> Tensor:
    if isinstance(index, Tensor):
        index = index.data.astype(np.int64)
    out = a.data[index]
    src, dtype = a.shape, a.dtype

    def rule(g):
        full = np.zeros(src, dtype=dtype)
        np.add.at(full, index, g)
        return (full,)

    return make_result(np.array(out, copy=True), (a,), "getitem", rule)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def rule(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return make_result(out, tensors, "stack", rule)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def rule(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_result(out, tensors, "concat", rule)
