"""
Synthetic video universe.

Each video gets its own child RNG stream (SeedSequence.spawn), so a record
depends only on (config, seed, video_id) and generation could be split
across workers without changing the result.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.errors import ConfigError
from app.schemas import N_CATEGORIES, CorpusConfig

logger = logging.getLogger(__name__)

GENERAL_VOCAB_SHARE = 0.25


class VideoClass(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    class_id: int = Field(..., ge=0)
    label: str


class VideoRecord(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    video_id: int = Field(..., ge=0)
    class_memberships: List[int] = Field(..., min_length=1)
    primary_class: int = Field(..., ge=0)
    category_id: int = Field(..., ge=0, lt=N_CATEGORIES)
    popularity: float = Field(..., ge=0, allow_inf_nan=False)
    rating: float = Field(..., ge=0, le=5)
    tokens: List[int] = Field(..., min_length=1)

    @field_validator("class_memberships")
    @classmethod
    def _sorted_unique(cls, v):
        return sorted(set(v))


class Corpus:
    """Read-only collection of VideoRecords indexed by video_id (0..n-1)."""

    def __init__(self, records: Sequence[VideoRecord], classes: Sequence[VideoClass]):
        self.records: List[VideoRecord] = list(records)
        self.classes: List[VideoClass] = list(classes)
        for idx, rec in enumerate(self.records):
            if rec.video_id != idx:
                raise ValueError(f"video ids must be contiguous from 0 (found {rec.video_id} at {idx})")
        k = len(self.classes)
        self.membership = np.zeros((len(self.records), k), dtype=np.float64)
        for rec in self.records:
            self.membership[rec.video_id, rec.class_memberships] = 1.0
        self.popularity = np.array([r.popularity for r in self.records], dtype=np.float64)
        self.primary = np.array([r.primary_class for r in self.records], dtype=np.int64)

    @property
    def n_videos(self) -> int:
        return len(self.records)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, video_id: int) -> VideoRecord:
        return self.records[video_id]

    def class_members(self, class_id: int) -> np.ndarray:
        return np.flatnonzero(self.membership[:, class_id] > 0)

    def primary_counts(self) -> np.ndarray:
        return np.bincount(self.primary, minlength=self.n_classes)

    def by_popularity(self, video_ids: Sequence[int] | np.ndarray) -> List[int]:
        """Sort ids by popularity descending, ties by ascending id."""
        ids = np.asarray(video_ids, dtype=np.int64)
        order = np.lexsort((ids, -self.popularity[ids]))
        return ids[order].tolist()


def make_classes(n_classes: int) -> List[VideoClass]:
    width = max(2, len(str(n_classes - 1)))
    return [VideoClass(class_id=k, label=f"class-{k:0{width}d}") for k in range(n_classes)]


def _token_blocks(config: CorpusConfig) -> Dict[str, np.ndarray]:
    general = max(1, int(config.vocab_size * GENERAL_VOCAB_SHARE))
    block = (config.vocab_size - general) // config.n_classes
    if block < 1:
        raise ConfigError(
            f"vocab_size {config.vocab_size} leaves no topic tokens for {config.n_classes} classes"
        )
    return {"general": general, "block": block}


def _generate_record(video_id: int, rng: np.random.Generator, config: CorpusConfig,
                     prior: np.ndarray, vocab: Dict[str, int]) -> VideoRecord:
    k = config.n_classes
    theta = rng.dirichlet(config.mixture_concentration * k * prior)
    if video_id < k:
        primary = video_id  # minimal coverage: one primary member per class
    else:
        primary = int(rng.choice(k, p=theta))
    memberships = {primary}
    if rng.random() < config.extra_membership_prob:
        rest = theta.copy()
        rest[primary] = 0.0
        if rest.sum() > 0:
            memberships.add(int(rng.choice(k, p=rest / rest.sum())))
        else:
            memberships.add(int((primary + 1 + rng.integers(k - 1)) % k))

    if rng.random() < config.category_affinity:
        category = primary % (N_CATEGORIES - 1)
    else:
        category = int(rng.integers(N_CATEGORIES))

    popularity = float(rng.lognormal(config.popularity_log_mean, config.popularity_log_sigma))
    rating = float(np.clip(rng.normal(config.rating_mean, config.rating_std), 0.0, 5.0))

    n_tokens = 1 + int(rng.poisson(max(config.mean_tokens - 1, 0)))
    topical = rng.random(n_tokens) < config.topic_token_share
    member_list = sorted(memberships)
    owners = np.where(rng.random(n_tokens) < 0.7, primary, rng.choice(member_list, size=n_tokens))
    topic_tokens = vocab["general"] + owners * vocab["block"] + rng.integers(vocab["block"], size=n_tokens)
    general_tokens = rng.integers(vocab["general"], size=n_tokens)
    tokens = np.where(topical, topic_tokens, general_tokens)

    return VideoRecord(
        video_id=video_id,
        class_memberships=member_list,
        primary_class=primary,
        category_id=category,
        popularity=popularity,
        rating=rating,
        tokens=tokens.astype(int).tolist(),
    )


def generate_corpus(config: CorpusConfig, seed: int) -> Corpus:
    """Pure function of (config, seed)."""
    if config.n_videos < config.n_classes:
        raise ConfigError("n_videos must be at least the number of classes")
    prior = np.asarray(config.prior(), dtype=np.float64)
    vocab = _token_blocks(config)
    children = np.random.SeedSequence(seed).spawn(config.n_videos)
    records = [
        _generate_record(vid, np.random.default_rng(child), config, prior, vocab)
        for vid, child in enumerate(children)
    ]
    corpus = Corpus(records, make_classes(config.n_classes))
    logger.info(
        "Generated corpus: %d videos, %d classes, %.2f memberships/video",
        corpus.n_videos, corpus.n_classes, corpus.membership.sum() / corpus.n_videos,
    )
    return corpus
