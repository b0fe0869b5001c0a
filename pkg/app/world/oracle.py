"""
The ground-truth recommendation oracle.

Per refresh, class scores are

    log(affinity_k + smoothing) + popularity_weight * log(class_popularity_k) + T * Gumbel

where affinity is the recency-decayed class membership of the watch
history. Refresh slots are apportioned to classes by largest remainder of
softmax(scores); each class serves its most popular eligible videos,
consuming its pool across refreshes. The oracle only ever sees video ids,
never who chose them.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from app.corpus.generator import Corpus
from app.errors import DegenerateInputError
from app.schemas import WorldConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Recommendation:
    video_ids: Tuple[int, ...]
    distribution: np.ndarray


def persona_ids(persona) -> Tuple[int, ...]:
    ids = getattr(persona, "video_ids", persona)
    return tuple(int(v) for v in ids)


def persona_hash(video_ids: Sequence[int]) -> int:
    digest = hashlib.blake2b(np.asarray(video_ids, dtype=np.int64).tobytes(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """
    Integer allocation of `total` proportional to each row of `weights`.
    Leftover units go to the largest remainders, ties to the lower index.
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    sums = weights.sum(axis=1, keepdims=True)
    quotas = np.divide(weights, sums, out=np.zeros_like(weights), where=sums > 0) * total
    base = np.floor(quotas + 1e-12).astype(np.int64)
    remainder = quotas - base
    idx = np.arange(weights.shape[1])
    for row in range(weights.shape[0]):
        missing = total - int(base[row].sum())
        if missing > 0:
            order = np.lexsort((idx, -remainder[row]))
            base[row, order[:missing]] += 1
    return base


class RecommendationWorld:
    def __init__(self, corpus: Corpus, config: WorldConfig):
        self.corpus = corpus
        self.config = config
        self.n_classes = corpus.n_classes

        pop = corpus.popularity
        if config.popular_filter_quantile >= 1.0:
            self.popular_mask = np.zeros(pop.size, dtype=bool)
        else:
            self.popular_mask = pop > np.quantile(pop, config.popular_filter_quantile)

        self.pools: List[np.ndarray] = []
        class_pop = np.zeros(self.n_classes)
        for k in range(self.n_classes):
            members = corpus.class_members(k)
            eligible = members[~self.popular_mask[members]]
            self.pools.append(np.asarray(corpus.by_popularity(eligible), dtype=np.int64))
            class_pop[k] = pop[eligible].sum()
        self.eligible_classes = class_pop > 0
        if not self.eligible_classes.any():
            raise DegenerateInputError("no class has any recommendable video")
        share = class_pop / class_pop.sum()
        with np.errstate(divide="ignore"):
            self._log_prior = np.where(self.eligible_classes, np.log(np.where(share > 0, share, 1.0)), -np.inf)

        row_sums = corpus.membership.sum(axis=1, keepdims=True)
        self._membership_share = corpus.membership / row_sums
        logger.debug(
            "World ready: %d classes, %d popular videos filtered, T=%.4f",
            self.n_classes, int(self.popular_mask.sum()), config.noise_temperature,
        )

    # ----------------------------------------------------------
    @property
    def noise_temperature(self) -> float:
        return self.config.noise_temperature

    def with_noise_temperature(self, temperature: float) -> "RecommendationWorld":
        return RecommendationWorld(self.corpus, self.config.model_copy(update={"noise_temperature": float(temperature)}))

    def popular_video_ids(self) -> np.ndarray:
        return np.flatnonzero(self.popular_mask)

    def affinity(self, video_ids: Sequence[int]) -> np.ndarray:
        ids = np.asarray(video_ids, dtype=np.int64)
        weights = self.config.affinity_decay ** np.arange(ids.size - 1, -1, -1, dtype=np.float64)
        a = weights @ self._membership_share[ids]
        return a / a.sum()

    def _class_probs(self, video_ids: Sequence[int], rng: np.random.Generator, refreshes: int) -> np.ndarray:
        a = self.affinity(video_ids)
        score = np.log(a + self.config.affinity_smoothing) + self.config.popularity_weight * self._log_prior
        noise = rng.gumbel(size=(refreshes, self.n_classes))
        logits = score[None, :] + self.config.noise_temperature * noise
        logits = np.where(self.eligible_classes[None, :], logits, -np.inf)
        return softmax(logits, axis=1)

    def _rng(self, ids: Tuple[int, ...], seed: int) -> np.random.Generator:
        return np.random.default_rng([int(seed), persona_hash(ids)])

    # ----------------------------------------------------------
    def recommend(self, persona, seed: int = 0) -> Recommendation:
        ids = persona_ids(persona)
        if not ids:
            raise DegenerateInputError("cannot recommend for an empty persona")
        rng = self._rng(ids, seed)
        probs = self._class_probs(ids, rng, self.config.refreshes)
        counts = largest_remainder(probs, self.config.recs_per_refresh).sum(axis=0)

        chosen: dict = {}
        for k in range(self.n_classes):
            take = min(int(counts[k]), self.pools[k].size)
            for v in self.pools[k][:take]:
                chosen.setdefault(int(v), None)
        videos = tuple(chosen)
        mass = self.corpus.membership[list(videos)].sum(axis=0)
        return Recommendation(video_ids=videos, distribution=mass / mass.sum())

    def recommend_distribution(self, persona, seed: int = 0) -> np.ndarray:
        return self.recommend(persona, seed).distribution

    def up_next(self, persona, count: int, seed: int = 0) -> List[int]:
        """A single refresh of `count` candidates, skipping already-watched videos."""
        ids = persona_ids(persona)
        if not ids:
            raise DegenerateInputError("cannot recommend for an empty persona")
        rng = self._rng(ids, seed)
        counts = largest_remainder(self._class_probs(ids, rng, 1), count)[0]
        watched = set(ids)
        picked: List[int] = []
        seen = set()
        for k in range(self.n_classes):
            need = int(counts[k])
            for v in self.pools[k]:
                if need == 0:
                    break
                v = int(v)
                if v in watched or v in seen:
                    continue
                picked.append(v)
                seen.add(v)
                need -= 1
        return picked
