from __future__ import annotations

import logging
from typing import Dict, Optional

import numpy as np

from app.diffnet.core import Module, Parameter

logger = logging.getLogger(__name__)


class SGD:
    """
    Momentum SGD:  v <- mu * v + g ;  p <- p - lr * v

    Optionally rescales the global gradient norm to `max_grad_norm` before
    the update, and checks every parameter stays finite afterwards.
    """

    def __init__(self, module: Module, lr: float, momentum: float = 0.0,
                 max_grad_norm: Optional[float] = None):
        if lr < 0:
            raise ValueError("lr must be non-negative")
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        self.module = module
        self.lr = lr
        self.momentum = momentum
        self.max_grad_norm = max_grad_norm
        self.velocity: Dict[str, np.ndarray] = {
            name: np.zeros_like(p.values) for name, p in module.parameters().items()
        }

    def step(self) -> float:
        params = self.module.parameters()
        norm = self.module.grad_norm()
        scale = 1.0
        if self.max_grad_norm is not None and norm > self.max_grad_norm:
            scale = self.max_grad_norm / norm
            logger.debug("Clipping gradient norm %.4f -> %.4f", norm, self.max_grad_norm)
        for name, param in params.items():
            sgd_step(param, self.velocity[name], self.lr, self.momentum, scale)
        self.module.check_finite()
        return norm

    def zero_grad(self) -> None:
        self.module.zero_grad()


def sgd_step(param: Parameter, velocity: np.ndarray, lr: float, momentum: float, scale: float = 1.0) -> None:
    """In-place momentum update of one parameter."""
    velocity *= momentum
    velocity += scale * param.grads
    param.values -= lr * velocity
