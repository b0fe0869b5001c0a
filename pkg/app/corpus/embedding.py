"""
Deterministic video embeddings.

meta (20)     = category one-hot (18) + standardized popularity + standardized rating
content (d)   = L2-normalized signed feature hashing of the transcript tokens
combined      = concat(meta, content)
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.corpus.generator import Corpus, VideoRecord
from app.errors import DegenerateInputError
from app.schemas import N_CATEGORIES

logger = logging.getLogger(__name__)

D_META = N_CATEGORIES + 2


class CorpusStats(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    popularity_mean: float
    popularity_std: float
    rating_mean: float
    rating_std: float
    content_dim: int
    n_videos: int


def compute_stats(corpus: Corpus, content_dim: int) -> CorpusStats:
    popularity = np.array([r.popularity for r in corpus.records], dtype=np.float64)
    rating = np.array([r.rating for r in corpus.records])
    stats = CorpusStats(
        popularity_mean=float(popularity.mean()),
        popularity_std=float(popularity.std()),
        rating_mean=float(rating.mean()),
        rating_std=float(rating.std()),
        content_dim=content_dim,
        n_videos=corpus.n_videos,
    )
    if stats.popularity_std <= 0 or stats.rating_std <= 0:
        raise DegenerateInputError("corpus popularity or rating has zero standard deviation")
    return stats


@dataclass(frozen=True)
class Embedding:
    meta: np.ndarray
    content: np.ndarray

    @property
    def combined(self) -> np.ndarray:
        return np.concatenate([self.meta, self.content])

    @property
    def dim(self) -> int:
        return self.meta.size + self.content.size


@lru_cache(maxsize=200_000)
def _hash_token(token: int, dim: int) -> tuple:
    digest = hashlib.sha256(f"tok:{token}".encode("utf-8")).digest()
    value = int.from_bytes(digest[:8], "big")
    return value % dim, (1.0 if digest[8] & 1 else -1.0)


def hash_tokens(tokens: Iterable[int], dim: int) -> np.ndarray:
    """Signed bag-of-tokens hash, L2-normalized."""
    tokens = list(tokens)
    vec = np.zeros(dim, dtype=np.float64)
    count = 0
    for token in tokens:
        bucket, sign = _hash_token(int(token), dim)
        vec[bucket] += sign
        count += 1
    if count == 0:
        raise DegenerateInputError("cannot embed an empty token sequence")
    norm = np.linalg.norm(vec)
    if norm == 0:
        # every token cancelled out; fall back to the first token's basis vector
        bucket, sign = _hash_token(int(tokens[0]), dim)
        vec[bucket] = sign
        norm = 1.0
    return vec / norm


def meta_vector(v: VideoRecord, stats: CorpusStats) -> np.ndarray:
    if stats.popularity_std <= 0 or stats.rating_std <= 0:
        raise DegenerateInputError("zero standard deviation in corpus statistics")
    meta = np.zeros(D_META, dtype=np.float64)
    meta[v.category_id] = 1.0
    meta[N_CATEGORIES] = (v.popularity - stats.popularity_mean) / stats.popularity_std
    meta[N_CATEGORIES + 1] = (v.rating - stats.rating_mean) / stats.rating_std
    return meta


def embed_video(v: VideoRecord, stats: CorpusStats) -> Embedding:
    if not v.tokens:
        raise DegenerateInputError(f"video {v.video_id} has no tokens")
    return Embedding(meta=meta_vector(v, stats), content=hash_tokens(v.tokens, stats.content_dim))


def embed_corpus(corpus: Corpus, stats: CorpusStats) -> np.ndarray:
    """(n_videos, d_meta + d_content) matrix, row i = video i."""
    matrix = np.stack([embed_video(v, stats).combined for v in corpus.records])
    if not np.all(np.isfinite(matrix)):
        raise DegenerateInputError("non-finite values in corpus embeddings")
    logger.info("Embedded %d videos into %d dims", matrix.shape[0], matrix.shape[1])
    return matrix


def persona_matrix(embeddings: np.ndarray, video_ids: Sequence[int]) -> np.ndarray:
    return embeddings[np.asarray(video_ids, dtype=np.int64)]
