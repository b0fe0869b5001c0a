"""Central finite-difference checks for analytic gradients."""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from app.diffnet.core import Module


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    """Norm-wise relative error ||a - b|| / (||a|| + ||b||)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(float(np.linalg.norm(a) + np.linalg.norm(b)), floor)
    return float(np.linalg.norm(a - b) / denom)


def numeric_gradient(f: Callable[[], float], array: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """d f / d array by central differences, perturbing `array` in place."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"], op_flags=["readwrite"])
    while not it.finished:
        idx = it.multi_index
        orig = array[idx]
        array[idx] = orig + h
        plus = f()
        array[idx] = orig - h
        minus = f()
        array[idx] = orig
        grad[idx] = (plus - minus) / (2 * h)
        it.iternext()
    return grad


def check_module_gradients(
    module: Module,
    loss_and_backward: Callable[[], float],
    loss_only: Callable[[], float],
    h: float = 1e-4,
) -> Dict[str, float]:
    """
    Compare analytic parameter gradients with finite differences.

    `loss_and_backward` must zero grads, run forward + backward and return
    the loss; `loss_only` runs a forward pass only. Returns the max relative
    error per parameter.
    """
    loss_and_backward()
    analytic = {name: p.grads.copy() for name, p in module.parameters().items()}
    errors = {}
    for name, param in module.parameters().items():
        numeric = numeric_gradient(loss_only, param.values, h=h)
        errors[name] = relative_error(analytic[name], numeric)
    return errors
