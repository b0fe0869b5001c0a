"""
Environments the obfuscator is trained and evaluated against.

Both map a batch of persona id sequences to recommended class distributions;
the surrogate is deterministic, the world draws its refresh noise from
`seed` and each persona's content.
"""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from app.errors import DegenerateInputError
from app.surrogate.model import SurrogateNetwork
from app.surrogate.training import predict_batch


@runtime_checkable
class Environment(Protocol):
    name: str
    n_classes: int

    def distributions(self, personas: Sequence[Sequence[int]], seed: int = 0) -> np.ndarray:
        ...


class SurrogateEnvironment:
    name = "surrogate"

    def __init__(self, model: SurrogateNetwork, embeddings: np.ndarray, batch_size: int = 256):
        self.model = model
        self.embeddings = np.asarray(embeddings, dtype=np.float64)
        self.batch_size = batch_size
        self.n_classes = model.n_classes

    def distributions(self, personas: Sequence[Sequence[int]], seed: int = 0) -> np.ndarray:
        if any(len(p) == 0 for p in personas):
            raise DegenerateInputError("surrogate environment got an empty persona")
        return predict_batch(self.model, list(personas), self.embeddings, self.batch_size)

    def recommend_distribution(self, persona: Sequence[int], seed: int = 0) -> np.ndarray:
        """World-compatible single query, so norms can be estimated against the surrogate."""
        return self.distributions([persona], seed)[0]


class WorldEnvironment:
    name = "world"

    def __init__(self, world):
        self.world = world
        self.n_classes = world.n_classes

    def distributions(self, personas: Sequence[Sequence[int]], seed: int = 0) -> np.ndarray:
        if len(personas) == 0:
            return np.zeros((0, self.n_classes))
        return np.stack([self.world.recommend_distribution(p, seed=seed) for p in personas])

    def recommend_distribution(self, persona: Sequence[int], seed: int = 0) -> np.ndarray:
        return self.world.recommend_distribution(persona, seed=seed)


def make_environment(kind: str, *, world=None, surrogate: SurrogateNetwork | None = None,
                     embeddings: np.ndarray | None = None) -> Environment:
    if kind == "surrogate":
        if surrogate is None or embeddings is None:
            raise DegenerateInputError("the surrogate environment needs a trained model and embeddings")
        return SurrogateEnvironment(surrogate, embeddings)
    if kind == "world":
        if world is None:
            raise DegenerateInputError("the world environment needs a RecommendationWorld")
        return WorldEnvironment(world)
    raise ValueError(f"unknown environment: {kind}")
