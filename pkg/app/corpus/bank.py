"""
Per-class repopulation bank.

Class lists are built from videos seen in the recommendation log; classes
the log under-covers are topped up from the corpus, and classes the corpus
itself cannot fill are flagged "short" instead of failing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from app.corpus.generator import Corpus
from app.errors import DegenerateInputError

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_TOPPED_UP = "topped_up"
STATUS_SHORT = "short"


@dataclass(frozen=True)
class VideoBank:
    per_class: Dict[int, Tuple[int, ...]]
    refresh_generation: int = 0
    status: Dict[int, str] = field(default_factory=dict)
    noisy_videos: Tuple[int, ...] = ()

    def depth(self, class_id: int) -> int:
        return len(self.per_class.get(class_id, ()))

    def short_classes(self):
        return sorted(k for k, s in self.status.items() if s == STATUS_SHORT)

    def to_json(self) -> dict:
        return {
            "refresh_generation": self.refresh_generation,
            "per_class": {str(k): list(v) for k, v in sorted(self.per_class.items())},
            "status": {str(k): v for k, v in sorted(self.status.items())},
            "noisy_videos": list(self.noisy_videos),
        }

    @classmethod
    def from_json(cls, raw: dict) -> "VideoBank":
        return cls(
            per_class={int(k): tuple(v) for k, v in raw["per_class"].items()},
            refresh_generation=int(raw.get("refresh_generation", 0)),
            status={int(k): v for k, v in raw.get("status", {}).items()},
            noisy_videos=tuple(raw.get("noisy_videos", ())),
        )


def build_bank(corpus: Corpus, recommendations_log: Iterable[Sequence[int]], bank_min: int = 50,
               bank_size: Optional[int] = None, generation: int = 0) -> VideoBank:
    if corpus.n_videos == 0:
        raise DegenerateInputError("cannot build a bank from an empty corpus")
    logged = sorted({int(v) for recs in recommendations_log for v in recs})
    logged_mask = np.zeros(corpus.n_videos, dtype=bool)
    if logged:
        logged_mask[logged] = True

    per_class: Dict[int, Tuple[int, ...]] = {}
    status: Dict[int, str] = {}
    for k in range(corpus.n_classes):
        members = corpus.class_members(k)
        state = STATUS_OK
        if not logged:
            ranked = corpus.by_popularity(members)
        else:
            ranked = corpus.by_popularity(members[logged_mask[members]])
            if len(ranked) < bank_min:
                extra = corpus.by_popularity(members[~logged_mask[members]])
                ranked = corpus.by_popularity(ranked + extra[: bank_min - len(ranked)])
                state = STATUS_TOPPED_UP
        if len(ranked) < bank_min:
            state = STATUS_SHORT
            logger.warning("Class %d has only %d bank candidates (bank_min=%d)", k, len(ranked), bank_min)
        if bank_size is not None:
            ranked = ranked[:bank_size]
        per_class[k] = tuple(ranked)
        status[k] = state

    bank = VideoBank(per_class=per_class, refresh_generation=generation, status=status, noisy_videos=tuple(logged))
    logger.info(
        "Built video bank generation %d: %d classes, %d short, %d logged videos",
        generation, len(per_class), len(bank.short_classes()), len(logged),
    )
    return bank


def refresh_bank(bank: VideoBank, corpus: Corpus, recommendations_log: Iterable[Sequence[int]],
                 bank_min: int = 50, bank_size: Optional[int] = None) -> Tuple[VideoBank, float]:
    """Rebuild from a new log; returns (bank, mean share of entries kept per class)."""
    new = build_bank(corpus, recommendations_log, bank_min, bank_size, generation=bank.refresh_generation + 1)
    shares = []
    for k, old in bank.per_class.items():
        if old:
            shares.append(len(set(old) & set(new.per_class.get(k, ()))) / len(old))
    stability = float(np.mean(shares)) if shares else 0.0
    logger.info("Bank refresh %d kept %.1f%% of entries", new.refresh_generation, 100 * stability)
    return new, stability
