"""
Parameter containers and the `Module` base shared by layers and networks.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Dict, Iterator, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.errors import TrainingDivergedError

DTYPE = np.float64


class LayerSpec(BaseModel):
    """Serializable description of a layer, stored in checkpoints."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["dense", "conv1d", "lstm"]
    in_dim: int = Field(..., gt=0)
    out_dim: int = Field(..., gt=0)
    kernel: Optional[int] = Field(None, gt=0)
    hidden_dim: Optional[int] = Field(None, gt=0)


class Parameter:
    """A named tensor with a same-shaped gradient buffer. The shape never changes."""

    __slots__ = ("values", "grads")

    def __init__(self, values: np.ndarray):
        self.values = np.array(values, dtype=DTYPE)
        self.grads = np.zeros_like(self.values)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    def zero_grad(self) -> None:
        self.grads.fill(0.0)

    def assign(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=DTYPE)
        if values.shape != self.values.shape:
            raise ValueError(f"shape mismatch: expected {self.values.shape}, got {values.shape}")
        self.values[...] = values

    def check_finite(self, name: str) -> None:
        if not np.all(np.isfinite(self.values)):
            raise TrainingDivergedError(f"non-finite values in parameter '{name}'")
        if not np.all(np.isfinite(self.grads)):
            raise TrainingDivergedError(f"non-finite gradient in parameter '{name}'")

    def __repr__(self):
        return f"<Parameter shape={self.shape}>"


def uniform_init(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """
    Anything holding parameters. Sub-modules are discovered from attributes in
    assignment order, so parameter names are stable (``lstm.W``, ``head.b``).
    """

    def _own_parameters(self) -> Dict[str, Parameter]:
        return {}

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, param in self._own_parameters().items():
            yield prefix + name, param
        for attr, value in vars(self).items():
            if isinstance(value, Module):
                yield from value.named_parameters(prefix + attr + ".")

    def parameters(self) -> "OrderedDict[str, Parameter]":
        return OrderedDict(self.named_parameters())

    def zero_grad(self) -> None:
        for param in self.parameters().values():
            param.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.values.copy() for name, p in self.parameters().items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise ValueError(f"state mismatch (missing={sorted(missing)}, unexpected={sorted(unexpected)})")
        for name, param in params.items():
            param.assign(state[name])

    def fill_(self, value: float) -> None:
        """Set every parameter to a constant (0.0 gives the 'untrained' reference model)."""
        for param in self.parameters().values():
            param.values.fill(value)

    def check_finite(self) -> None:
        for name, param in self.parameters().items():
            param.check_finite(name)

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(p.grads ** 2) for p in self.parameters().values())))
