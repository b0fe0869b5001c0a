"""
Personas and the sock-puppet random-walk generator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from app.errors import DegenerateInputError
from app.schemas import SockPuppetConfig

logger = logging.getLogger(__name__)


class Source(str, Enum):
    USER = "user"
    OBFUSCATION = "obfuscation"


@dataclass(frozen=True)
class Persona:
    """Ordered watch history; each entry is tagged with who chose it."""

    video_ids: Tuple[int, ...]
    sources: Tuple[Source, ...]
    user_id: str = ""

    def __post_init__(self):
        if len(self.video_ids) != len(self.sources):
            raise ValueError("video_ids and sources must have the same length")

    @classmethod
    def from_user_videos(cls, video_ids: Sequence[int], user_id: str = "") -> "Persona":
        ids = tuple(int(v) for v in video_ids)
        return cls(ids, (Source.USER,) * len(ids), user_id)

    def __len__(self) -> int:
        return len(self.video_ids)

    @property
    def user_count(self) -> int:
        return sum(1 for s in self.sources if s is Source.USER)

    def user_videos(self) -> Tuple[int, ...]:
        """The user subsequence: drop obfuscation entries, keep order."""
        return tuple(v for v, s in zip(self.video_ids, self.sources) if s is Source.USER)

    def obfuscation_mask(self) -> np.ndarray:
        return np.array([s is Source.OBFUSCATION for s in self.sources], dtype=bool)

    def obfuscation_count(self) -> int:
        return int(self.obfuscation_mask().sum())

    def is_obfuscation_of(self, user: "Persona") -> bool:
        return self.user_videos() == tuple(user.video_ids)

    def entries(self) -> List[Tuple[int, Source]]:
        return list(zip(self.video_ids, self.sources))

    def prefix(self, length: int) -> "Persona":
        return Persona(self.video_ids[:length], self.sources[:length], self.user_id)


def seed_pool(world, share: float) -> np.ndarray:
    """Ids of the most popular `share` of the corpus (walk restart points)."""
    pop = world.corpus.popularity
    count = max(1, int(round(share * pop.size)))
    return np.asarray(world.corpus.by_popularity(np.arange(pop.size))[:count], dtype=np.int64)


def generate_sock_puppet(cfg: SockPuppetConfig, world, seed: int, user_id: str = "",
                         pool: np.ndarray | None = None) -> Persona:
    """
    Random walk over up-next recommendations:
      1) start a trail at a random popular seed video,
      2) follow one uniformly chosen up-next candidate per step,
      3) restart after `depth` videos, until `total` videos are watched.
    """
    rng = np.random.default_rng(seed)
    pool = seed_pool(world, cfg.seed_decile) if pool is None else pool
    if pool.size == 0:
        raise DegenerateInputError("empty seed pool")
    watched: List[int] = []
    while len(watched) < cfg.total:
        fresh = np.setdiff1d(pool, watched, assume_unique=False)
        start = int(rng.choice(fresh if fresh.size else pool))
        watched.append(start)
        depth = 1
        while depth < cfg.depth and len(watched) < cfg.total:
            candidates = world.up_next(watched, cfg.upnext_count, seed=int(rng.integers(2**31)))
            if not candidates:
                break
            watched.append(int(candidates[int(rng.integers(len(candidates)))]))
            depth += 1
    return Persona.from_user_videos(watched, user_id=user_id)


def generate_sock_puppets(cfg: SockPuppetConfig, world, count: int, seed: int, prefix: str = "sp") -> List[Persona]:
    pool = seed_pool(world, cfg.seed_decile)
    children = np.random.SeedSequence(seed).generate_state(count)
    personas = [
        generate_sock_puppet(cfg, world, int(s), user_id=f"{prefix}-{i:05d}", pool=pool)
        for i, s in enumerate(children)
    ]
    logger.info("Generated %d sock-puppet personas (D=%d, T=%d)", count, cfg.depth, cfg.total)
    return personas
