"""
Materialize a recommendation list from an estimated class distribution.

Slots are apportioned to classes by largest remainder; each class then
serves its most popular bank videos not already used. A class whose bank
runs dry spills its remaining slots to the next class by target mass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple

import numpy as np

from app.corpus.bank import VideoBank
from app.errors import DegenerateInputError
from app.world.oracle import largest_remainder

logger = logging.getLogger(__name__)


@dataclass
class RepopulationResult:
    video_ids: List[int]
    allocation: np.ndarray
    target: np.ndarray
    spills: List[Tuple[int, int, int]] = field(default_factory=list)
    membership: Optional[np.ndarray] = None

    @property
    def allocation_distribution(self) -> np.ndarray:
        """Share of slots served per class."""
        return self.allocation / self.allocation.sum()

    @property
    def distribution(self) -> np.ndarray:
        """Class mix of the served videos; slot shares when memberships are unknown."""
        if self.membership is None:
            return self.allocation_distribution
        mass = self.membership.sum(axis=0)
        return mass / mass.sum()

    @property
    def tv_gap(self) -> float:
        return 0.5 * float(np.abs(self.distribution - self.target).sum())


def _take(bank: VideoBank, k: int, need: int, used: Set[int]) -> List[int]:
    picked = []
    for v in bank.per_class.get(k, ()):
        if len(picked) == need:
            break
        if v not in used:
            picked.append(int(v))
            used.add(int(v))
    return picked


def repopulate(bank: VideoBank, target: np.ndarray, count: int,
               membership: Optional[np.ndarray] = None) -> RepopulationResult:
    """
    `membership` is the corpus (n_videos, K) class-membership matrix; with it
    the result reports the class mix of the served videos, not only the slots.
    """
    if count < 1:
        raise DegenerateInputError("count must be >= 1")
    target = np.asarray(target, dtype=np.float64)
    if target.ndim != 1 or target.size == 0 or np.any(target < 0) or target.sum() <= 0:
        raise DegenerateInputError("target must be a non-negative, non-zero class vector")
    target = target / target.sum()
    if membership is not None:
        membership = np.asarray(membership, dtype=np.float64)
        if membership.ndim != 2 or membership.shape[1] != target.size:
            raise DegenerateInputError("membership matrix must have one column per target class")
    planned = largest_remainder(target[None, :], count)[0]

    by_mass = [int(k) for k in np.lexsort((np.arange(target.size), -target))]
    used: Set[int] = set()
    videos: List[int] = []
    served = np.zeros(target.size, dtype=np.int64)
    spills: List[Tuple[int, int, int]] = []
    deficit: List[Tuple[int, int]] = []
    for k in by_mass:
        got = _take(bank, k, int(planned[k]), used)
        videos.extend(got)
        served[k] += len(got)
        if len(got) < planned[k]:
            deficit.append((k, int(planned[k]) - len(got)))

    for source, missing in deficit:
        for k in by_mass:
            if missing == 0:
                break
            if k == source:
                continue
            got = _take(bank, k, missing, used)
            if got:
                videos.extend(got)
                served[k] += len(got)
                spills.append((source, k, len(got)))
                missing -= len(got)
        if missing:
            raise DegenerateInputError(f"bank cannot supply {count} distinct videos")

    rows = membership[np.asarray(videos, dtype=np.int64)] if membership is not None else None
    result = RepopulationResult(video_ids=videos, allocation=served, target=target, spills=spills, membership=rows)
    if spills:
        logger.warning("Repopulation spilled %d slots (TV gap %.4f)", sum(n for _, _, n in spills), result.tv_gap)
    return result
