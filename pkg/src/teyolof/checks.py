"""Finite-difference gradient suite over every differentiable op and block.

Each case builds a scalar function of one tensor (an op input or a layer
parameter) from a seeded generator. Outputs are contracted with a fixed
random tensor so that no gradient is trivially zero. Points are kept away
from the kinks of relu/max/min/clip so central differences are exact there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autograd import Tensor, batchnorm2d, conv2d, grad_check, ops
from .detection.losses import LossConfig, decode_tensor, detection_loss, focal_loss, giou_tensor
from .detection.boxes import to_cxcywh
from .model import ModelOutput, fuse_scores
from .nn import ConvBNAct, DilatedResidualBlock, DSConvModule, Projector

TOLERANCE = 1e-4
STEP = 1e-5


@dataclass
class CheckResult:
    name: str
    seed: int
    error: float

    @property
    def passed(self) -> bool:
        return self.error < TOLERANCE


def _contract(rng, out: Tensor) -> Tensor:
    w = Tensor(rng.normal(size=out.shape))
    return ops.sum(ops.mul(out, w))


def _away_from_zero(rng, shape, gap=0.1):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < gap, np.sign(x + 1e-300) * gap + x, x)


def _unary(fn, domain="real"):
    def build(rng):
        if domain == "positive":
            x = rng.uniform(0.2, 3.0, size=(3, 4))
        elif domain == "kinked":
            x = _away_from_zero(rng, (3, 4))
        elif domain == "clip":
            # straddle both clip bounds but stay 0.1 away from them
            x = _away_from_zero(rng, (3, 4)) * 1.5
            x = np.where(np.abs(np.abs(x) - 1.0) < 0.1, x * 1.3, x)
        else:
            x = rng.normal(size=(3, 4)) * 2.0
        return (lambda t: _contract(rng_fixed(rng), fn(t))), x
    return build


def rng_fixed(rng):
    """A generator that replays the same weights on every call of the built function."""
    state = rng.bit_generator.state
    g = np.random.default_rng()
    g.bit_generator.state = state
    return g


def _binary(fn, side, b_domain="real", layout="same"):
    def build(rng):
        a = rng.normal(size=(2, 3, 2, 2))
        if layout == "channel":
            b = rng.normal(size=(3,))
        else:
            b = rng.normal(size=a.shape)
        if b_domain == "positive":
            b = np.abs(b) + 0.5
        if b_domain == "separated":
            b = a + np.where(rng.random(a.shape) < 0.5, -1.0, 1.0) * rng.uniform(0.2, 1.0, size=a.shape)
        other = Tensor(b if side == 0 else a)
        point = a if side == 0 else b
        if side == 0:
            return (lambda t: _contract(rng_fixed(rng), fn(t, other))), point
        return (lambda t: _contract(rng_fixed(rng), fn(other, t))), point
    return build


def _shape_op(fn, shape=(2, 3, 4)):
    def build(rng):
        return (lambda t: _contract(rng_fixed(rng), fn(t))), rng.normal(size=shape)
    return build


def _conv_case(which, stride=1, padding=1, dilation=1, groups=1, bias=True):
    def build(rng):
        cin, cout = 4, 4
        x = rng.normal(size=(2, cin, 6, 6))
        w = rng.normal(size=(cout, cin // groups, 3, 3)) * 0.5
        b = rng.normal(size=(cout,))
        args = {"x": x, "w": w, "b": b}

        def f(t):
            vals = {k: (t if k == which else Tensor(v)) for k, v in args.items()}
            out = conv2d(vals["x"], vals["w"], vals["b"] if bias else None, stride=stride, padding=padding,
                         dilation=dilation, groups=groups)
            return _contract(rng_fixed(rng), out)
        return f, args[which]
    return build


def _bn_case(which, training=True):
    def build(rng):
        x = rng.normal(size=(3, 2, 3, 3)) * 2.0 + 1.0
        args = {"x": x, "scale": rng.uniform(0.5, 1.5, size=2), "shift": rng.normal(size=2)}
        rm, rv = rng.normal(size=2), rng.uniform(0.5, 2.0, size=2)

        def f(t):
            vals = {k: (t if k == which else Tensor(v)) for k, v in args.items()}
            out = batchnorm2d(vals["x"], vals["scale"], vals["shift"], rm.copy(), rv.copy(), training)
            return _contract(rng_fixed(rng), out)
        return f, args[which]
    return build


def _module_case(make, in_shape, param: str | None = None):
    """Gradient w.r.t. the module input, or w.r.t. the named parameter."""
    def build(rng):
        module = make(np.random.default_rng(int(rng.integers(1 << 31))))
        x = rng.normal(size=in_shape)
        if param is None:
            return (lambda t: _contract(rng_fixed(rng), module(t))), x
        owner_path, attr = param.rsplit(".", 1)
        owner = dict(module.named_modules())[owner_path]
        original = getattr(owner, attr)

        def f(t):
            object.__setattr__(owner, attr, t)
            try:
                return _contract(rng_fixed(rng), module(Tensor(x)))
            finally:
                object.__setattr__(owner, attr, original)
        return f, original.data.copy()
    return build


def _focal_case(rng):
    p = rng.uniform(0.05, 0.95, size=(4, 3))
    target = (rng.random((4, 3)) < 0.3).astype(float)
    return (lambda t: focal_loss(t, target, 0.25, 2.0, normalizer=3.0)), p


def _giou_case(rng):
    anchors = np.column_stack([rng.uniform(0, 20, 4), rng.uniform(0, 20, 4), rng.uniform(20, 40, 4),
                               rng.uniform(20, 40, 4)])
    gts = anchors + rng.normal(size=(4, 4)) * 3.0
    gts[:, 2:] = np.maximum(gts[:, 2:], gts[:, :2] + 5.0)
    deltas = rng.normal(size=(4, 4)) * 0.2
    ac = to_cxcywh(anchors)
    return (lambda t: ops.sum(giou_tensor(decode_tensor(ac, t), gts))), deltas


def _fuse_case(which):
    def build(rng):
        cls, obj = rng.normal(size=(1, 6, 2, 2)), rng.normal(size=(1, 2, 2, 2))

        def f(t):
            c = t if which == "cls" else Tensor(cls)
            o = t if which == "obj" else Tensor(obj)
            return _contract(rng_fixed(rng), fuse_scores(c, o, 3))
        return f, (cls if which == "cls" else obj)
    return build


def _detection_loss_case(which):
    def build(rng):
        a, k, hf = 2, 3, 2
        anchors = np.array([[cx - s / 2, cy - s / 2, cx + s / 2, cy + s / 2]
                            for cy in (8.0, 24.0) for cx in (8.0, 24.0) for s in (10.0, 20.0)])
        heads = {"cls": rng.normal(size=(1, a * k, hf, hf)), "reg": rng.normal(size=(1, a * 4, hf, hf)) * 0.1,
                 "obj": rng.normal(size=(1, a, hf, hf))}
        boxes = np.array([[3.0, 4.0, 14.0, 13.0], [17.0, 15.0, 31.0, 30.0]])
        targets = [(boxes, np.array([1, 2]))]

        def f(t):
            v = {n: (t if n == which else Tensor(h)) for n, h in heads.items()}
            out = ModelOutput(v["cls"], v["reg"], v["obj"])
            return detection_loss(out, anchors, targets, k, LossConfig()).total
        return f, heads[which]
    return build


def gradient_cases() -> dict[str, Callable]:
    cases = {
        "add": _binary(ops.add, 0), "add.rhs_channel": _binary(ops.add, 1, layout="channel"),
        "sub": _binary(ops.sub, 0), "sub.rhs": _binary(ops.sub, 1),
        "mul": _binary(ops.mul, 0), "mul.rhs_channel": _binary(ops.mul, 1, layout="channel"),
        "div": _binary(ops.div, 0, "positive"), "div.rhs": _binary(ops.div, 1, "positive"),
        "maximum": _binary(ops.maximum, 0, "separated"), "maximum.rhs": _binary(ops.maximum, 1, "separated"),
        "minimum": _binary(ops.minimum, 0, "separated"), "minimum.rhs": _binary(ops.minimum, 1, "separated"),
        "neg": _unary(ops.neg), "scale": _unary(lambda t: ops.scale(t, -1.7)),
        "add_scalar": _unary(lambda t: ops.add_scalar(t, 0.3)),
        "pow": _unary(lambda t: ops.pow(t, 2.5), "positive"),
        "exp": _unary(ops.exp), "log": _unary(ops.log, "positive"),
        "sigmoid": _unary(ops.sigmoid), "log_sigmoid": _unary(ops.log_sigmoid), "tanh": _unary(ops.tanh),
        "softplus": _unary(ops.softplus), "relu": _unary(ops.relu, "kinked"), "mish": _unary(ops.mish),
        "swish": _unary(ops.swish), "clip": _unary(lambda t: ops.clip(t, -1.0, 1.0), "clip"),
        "sum.axis": _shape_op(lambda t: ops.sum(t, axis=1)), "mean": _shape_op(lambda t: ops.mean(t, axis=2)),
        "reshape": _shape_op(lambda t: ops.reshape(t, (6, 4))),
        "transpose": _shape_op(lambda t: ops.transpose(t, (2, 0, 1))),
        "broadcast_to": _shape_op(lambda t: ops.broadcast_to(t, (2, 2, 3, 4)), (2, 1, 3, 1)),
        "getitem": _shape_op(lambda t: t[:, 1:3, ::2]),
        "stack": _shape_op(lambda t: ops.stack([t, ops.scale(t, 2.0)], axis=1)),
        "concat": _shape_op(lambda t: ops.concat([t, ops.exp(t)], axis=2)),
        "conv2d.input": _conv_case("x"), "conv2d.weight": _conv_case("w"), "conv2d.bias": _conv_case("b"),
        "conv2d.stride2": _conv_case("x", stride=2), "conv2d.dilation2": _conv_case("x", padding=2, dilation=2),
        "conv2d.groups2.weight": _conv_case("w", groups=2),
        "conv2d.depthwise.input": _conv_case("x", groups=4, bias=False),
        "conv2d.depthwise.weight": _conv_case("w", stride=2, groups=4),
        "batchnorm.train.input": _bn_case("x"), "batchnorm.train.scale": _bn_case("scale"),
        "batchnorm.train.shift": _bn_case("shift"), "batchnorm.infer.input": _bn_case("x", False),
        "focal_loss": _focal_case, "giou_loss": _giou_case,
        "fuse_scores.cls": _fuse_case("cls"), "fuse_scores.obj": _fuse_case("obj"),
        "conv_bn_mish.input": _module_case(lambda r: ConvBNAct(3, 4, 3, act="mish", rng=r), (2, 3, 4, 4)),
        "ds_module.input": _module_case(lambda r: DSConvModule(3, 4, rng=r), (2, 3, 4, 4)),
        "ds_module.dw_weight": _module_case(lambda r: DSConvModule(3, 4, rng=r), (2, 3, 4, 4), "dw_conv.weight"),
        "ds_module.pw_weight": _module_case(lambda r: DSConvModule(3, 4, rng=r), (2, 3, 4, 4), "pw_conv.weight"),
        "dilated_block.input": _module_case(lambda r: DilatedResidualBlock(8, 2, rng=r), (2, 8, 5, 5)),
        "dilated_block.weight": _module_case(lambda r: DilatedResidualBlock(8, 2, rng=r), (2, 8, 5, 5),
                                             "dilated.conv.weight"),
        "projector.input": _module_case(lambda r: Projector(3, 4, rng=r), (2, 3, 4, 4)),
        "detection_loss.cls": _detection_loss_case("cls"), "detection_loss.reg": _detection_loss_case("reg"),
        "detection_loss.obj": _detection_loss_case("obj"),
    }
    return cases


def gradient_suite(seeds=range(10), names=None, step: float = STEP) -> list[CheckResult]:
    cases = gradient_cases()
    results = []
    for name in names or cases:
        for seed in seeds:
            f, point = cases[name](np.random.default_rng(seed))
            results.append(CheckResult(name, seed, grad_check(f, point, step)))
    return results
