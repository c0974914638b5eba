"""Central finite-difference gradient verification."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


def numerical_gradient(f: Callable[[Tensor], Tensor], point: np.ndarray, step: float = 1e-5) -> np.ndarray:
    x = np.array(point, dtype=np.float64, copy=True)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f(Tensor(x)).item()
        flat[i] = orig - step
        lo = f(Tensor(x)).item()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def analytic_gradient(f: Callable[[Tensor], Tensor], point: np.ndarray) -> np.ndarray:
    x = Tensor(np.array(point, dtype=np.float64, copy=True), requires_grad=True)
    out = f(x)
    out.backward()
    return np.zeros_like(x.data) if x.grad is None else x.grad


def grad_check(f: Callable[[Tensor], Tensor], point, step: float = 1e-5) -> float:
    """Max elementwise relative error between backprop and central differences.

    The relative error uses ``max(1, |analytic|, |numeric|)`` as denominator so
    that near-zero gradients are compared absolutely.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    point = np.asarray(point, dtype=np.float64)
    ana = analytic_gradient(f, point)
    num = numerical_gradient(f, point, step)
    denom = np.maximum(1.0, np.maximum(np.abs(ana), np.abs(num)))
    return float(np.max(np.abs(ana - num) / denom)) if ana.size else 0.0
