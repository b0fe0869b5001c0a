"""
Empirical D^Min / D^Max estimation for a recommendation world.

d_min: divergence caused by the world's own randomness, the mean KL between
       the average of R refresh samples and each sample of the same persona.
d_max: divergence between different users, the mean KL between one
       persona's average distribution and another persona's samples.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.errors import DegenerateInputError
from app.metrics.divergence import kl_rows

logger = logging.getLogger(__name__)


class NormalizationConstants(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d_min: float = Field(..., ge=0)
    d_max: float = Field(..., ge=0)
    d_min_stderr: float = 0.0
    d_max_stderr: float = 0.0
    n_samples_min: int = 0
    n_samples_max: int = 0

    @property
    def is_usable(self) -> bool:
        return self.d_max > self.d_min


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))


def refresh_samples(world, personas: Sequence[Sequence[int]], n_refresh_samples: int, seed: int) -> np.ndarray:
    """(N, R, K) array of recommended class distributions."""
    out = np.zeros((len(personas), n_refresh_samples, world.n_classes))
    for i, persona in enumerate(personas):
        for r in range(n_refresh_samples):
            out[i, r] = world.recommend_distribution(persona, seed=seed + r)
    return out


def estimate_norms(personas: Sequence[Sequence[int]], world, n_refresh_samples: int = 10,
                   n_pairs: int = 500, seed: int = 0) -> NormalizationConstants:
    if len(personas) < 2:
        raise DegenerateInputError("estimate_norms needs at least two personas")
    if n_refresh_samples < 2:
        raise DegenerateInputError("estimate_norms needs at least two refresh samples")

    samples = refresh_samples(world, personas, n_refresh_samples, seed)
    n, r, k = samples.shape
    means = samples.mean(axis=1)

    within = kl_rows(np.repeat(means, r, axis=0), samples.reshape(n * r, k))

    all_pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    if len(all_pairs) > n_pairs:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(all_pairs), size=n_pairs, replace=False)
        pairs = [all_pairs[t] for t in sorted(idx)]
    else:
        pairs = all_pairs
    left = np.array([i for i, _ in pairs])
    right = np.array([j for _, j in pairs])
    between = kl_rows(
        np.repeat(means[left], r, axis=0),
        samples[right].reshape(len(pairs) * r, k),
    )

    norms = NormalizationConstants(
        d_min=float(within.mean()),
        d_max=float(between.mean()),
        d_min_stderr=_stderr(within),
        d_max_stderr=_stderr(between),
        n_samples_min=int(within.size),
        n_samples_max=int(between.size),
    )
    logger.info(
        "Estimated normalization constants d_min=%.4f (±%.4f) d_max=%.4f (±%.4f)",
        norms.d_min, norms.d_min_stderr, norms.d_max, norms.d_max_stderr,
    )
    if not norms.is_usable:
        logger.warning("d_max <= d_min; normalized privacy is undefined for this world")
    return norms
