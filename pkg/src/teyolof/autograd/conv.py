"""2-D convolution (stride, padding, dilation, groups) and batch normalisation."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .tensor import Tensor, make_result


def conv_output_size(size: int, kernel: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def _check_conv(x_shape, w_shape, stride, padding, dilation, groups):
    if len(x_shape) != 4:
        raise ConfigError(f"conv2d input must be [N,C,H,W], got {x_shape}")
    if len(w_shape) != 4:
        raise ConfigError(f"conv2d weight must be [Cout,Cin/groups,Kh,Kw], got {w_shape}")
    if groups < 1 or stride < 1 or dilation < 1 or padding < 0:
        raise ConfigError(f"invalid conv params stride={stride} padding={padding} dilation={dilation} groups={groups}")
    cin, cout = x_shape[1], w_shape[0]
    if cin % groups:
        raise ConfigError(f"input channels {cin} not divisible by groups {groups}")
    if cout % groups:
        raise ConfigError(f"output channels {cout} not divisible by groups {groups}")
    if w_shape[1] != cin // groups:
        raise ConfigError(f"weight in-channels {w_shape[1]} != input channels {cin} / groups {groups}")
    ho = conv_output_size(x_shape[2], w_shape[2], stride, padding, dilation)
    wo = conv_output_size(x_shape[3], w_shape[3], stride, padding, dilation)
    if ho < 1 or wo < 1:
        raise ConfigError(f"conv2d output height/width {ho}x{wo} is empty for input {x_shape[2:]}")
    return ho, wo


def _taps(kh, kw, stride, dilation, ho, wo):
    for i in range(kh):
        for j in range(kw):
            hs = slice(i * dilation, i * dilation + stride * (ho - 1) + 1, stride)
            ws = slice(j * dilation, j * dilation + stride * (wo - 1) + 1, stride)
            yield i * kw + j, hs, ws


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1,
           padding: int = 0, dilation: int = 1, groups: int = 1) -> Tensor:
    """Cross-correlation with symmetric zero padding.

    Depthwise layers (one input and one output channel per group) accumulate
    the shifted taps directly. Everything else gathers taps into a column
    buffer laid out ``[G, Cg*K, N*P]`` so each group is one matrix product.
    """
    ho, wo = _check_conv(x.shape, weight.shape, stride, padding, dilation, groups)
    cout, cg = weight.shape[:2]
    if cg == 1 and cout == groups:
        out, rule = _depthwise(x, weight, stride, padding, dilation, ho, wo)
    else:
        out, rule = _grouped(x, weight, stride, padding, dilation, groups, ho, wo)
    if bias is not None:
        out += bias.data.reshape(1, -1, 1, 1)

        def bias_rule(g, rule=rule):
            return (*rule(g), g.sum(axis=(0, 2, 3)))

        return make_result(out, (x, weight, bias), "conv2d", bias_rule)
    return make_result(out, (x, weight), "conv2d", rule)


def _pad(xd, padding):
    if not padding:
        return xd
    return np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _unpad(gxp, padding, h, w):
    return gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp


def _depthwise(x, weight, stride, padding, dilation, ho, wo):
    xd, wd = x.data, weight.data
    n, c, h, w = xd.shape
    kh, kw = wd.shape[2:]
    xp = _pad(xd, padding)
    wt = wd.reshape(c, kh * kw)
    out = np.zeros((n, c, ho, wo), dtype=xd.dtype)
    taps = list(_taps(kh, kw, stride, dilation, ho, wo))
    for t, hs, ws in taps:
        out += xp[:, :, hs, ws] * wt[:, t].reshape(1, c, 1, 1)

    def rule(g):
        gw = np.empty_like(wt)
        for t, hs, ws in taps:
            gw[:, t] = np.einsum("nchw,nchw->c", g, xp[:, :, hs, ws])
        gx = None
        if x.requires_grad:
            gxp = np.zeros(xp.shape, dtype=xd.dtype)
            for t, hs, ws in taps:
                gxp[:, :, hs, ws] += g * wt[:, t].reshape(1, c, 1, 1)
            gx = _unpad(gxp, padding, h, w)
        return gx, gw.reshape(wd.shape)

    return out, rule


def _grouped(x, weight, stride, padding, dilation, groups, ho, wo):
    xd, wd = x.data, weight.data
    n, c, h, w = xd.shape
    cout, cg, kh, kw = wd.shape
    g_, og, k, p = groups, cout // groups, kh * kw, ho * wo
    pointwise = kh == kw == 1 and stride == 1 and padding == 0
    if pointwise:
        buf = xd.reshape(n, c, 1, p)
    else:
        xp = _pad(xd, padding)
        buf = np.empty((n, c, k, ho, wo), dtype=xd.dtype)
        for t, hs, ws in _taps(kh, kw, stride, dilation, ho, wo):
            buf[:, :, t] = xp[:, :, hs, ws]
    # [N, G, Cg*K, P] -> [G, Cg*K, N*P]
    cols = np.ascontiguousarray(buf.reshape(n, g_, cg * k, p).transpose(1, 2, 0, 3)).reshape(g_, cg * k, n * p)
    wmat = wd.reshape(g_, og, cg * k)
    out = np.matmul(wmat, cols).reshape(g_, og, n, p).transpose(2, 0, 1, 3).reshape(n, cout, ho, wo)
    out = np.ascontiguousarray(out)

    def rule(gout):
        g2 = np.ascontiguousarray(gout.reshape(n, g_, og, p).transpose(1, 2, 0, 3)).reshape(g_, og, n * p)
        gw = np.matmul(g2, cols.transpose(0, 2, 1)).reshape(wd.shape)
        gx = None
        if x.requires_grad:
            gcols = np.matmul(wmat.transpose(0, 2, 1), g2)  # [G, Cg*K, N*P]
            gcols = gcols.reshape(g_, cg, k, n, ho, wo).transpose(3, 0, 1, 2, 4, 5).reshape(n, c, k, ho, wo)
            if pointwise:
                gx = np.ascontiguousarray(gcols.reshape(xd.shape))
            else:
                gxp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=xd.dtype)
                for t, hs, ws in _taps(kh, kw, stride, dilation, ho, wo):
                    gxp[:, :, hs, ws] += gcols[:, :, t]
                gx = _unpad(gxp, padding, h, w)
        return gx, gw

    return out, rule


def batchnorm2d(x: Tensor, scale: Tensor, shift: Tensor, running_mean: np.ndarray,
                running_var: np.ndarray, training: bool, momentum: float = 0.1,
                eps: float = 1e-5) -> Tensor:
    """Per-channel normalisation over (N, H, W).

    In training mode batch statistics are used and the running buffers are
    updated in place (unbiased variance, exponential average with
    ``momentum``). In inference mode the running buffers are used.
    """
    if eps <= 0:
        raise ConfigError("batchnorm eps must be > 0")
    if x.ndim != 4 or x.shape[1] != scale.shape[0] or shift.shape != scale.shape:
        raise ConfigError(f"batchnorm channel mismatch: input {x.shape}, scale {scale.shape}, shift {shift.shape}")
    xd = x.data
    gamma = scale.data.reshape(1, -1, 1, 1)
    beta = shift.data.reshape(1, -1, 1, 1)
    m = xd.shape[0] * xd.shape[2] * xd.shape[3]

    if not training:
        inv = 1.0 / np.sqrt(running_var.reshape(1, -1, 1, 1) + eps)
        xhat = (xd - running_mean.reshape(1, -1, 1, 1)) * inv
        out = gamma * xhat + beta

        def infer_rule(g):
            return (g * gamma * inv, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3)))

        return make_result(out, (x, scale, shift), "batchnorm2d", infer_rule)

    if m < 2:
        raise ConfigError("batchnorm in training mode needs more than one value per channel")
    mu = xd.mean(axis=(0, 2, 3), keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=(0, 2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma * xhat + beta

    running_mean *= 1.0 - momentum
    running_mean += momentum * mu.reshape(-1)
    running_var *= 1.0 - momentum
    running_var += momentum * var.reshape(-1) * (m / (m - 1))

    def train_rule(g):
        gbeta = g.sum(axis=(0, 2, 3))
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        gxhat = g * gamma
        gx = inv / m * (m * gxhat - gxhat.sum(axis=(0, 2, 3), keepdims=True)
                        - xhat * (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True))
        return gx, ggamma, gbeta

    return make_result(out, (x, scale, shift), "batchnorm2d", train_rule)
