"""
Obfuscators: the trained policy and the three reference strategies.

Every obfuscator answers `select(state, context, rng) -> (index, memory)`
where `index` points into the obfuscation video set and `memory` is carried
to the next step of the same episode.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import Any, Optional, Sequence, Tuple

import numpy as np

from app.errors import DegenerateInputError
from app.obfuscator.environments import Environment
from app.obfuscator.mdp import EpisodeContext, MDPState, RewardMetric, privacy_reward, run_episodes
from app.obfuscator.policy import PolicyNetwork, policy_distribution
from app.world.personas import Source

logger = logging.getLogger(__name__)


class Obfuscator(ABC):
    name: str = "obfuscator"

    def __init__(self, n_actions: int):
        if n_actions < 1:
            raise DegenerateInputError("empty obfuscation video set")
        self.n_actions = n_actions

    @abstractmethod
    def select(self, state: MDPState, context: EpisodeContext, rng: np.random.Generator) -> Tuple[int, Any]:
        ...


class RandObfuscator(Obfuscator):
    """Uniform over the obfuscation set."""

    name = "rand"

    def select(self, state, context, rng):
        return int(rng.integers(self.n_actions)), None


def baseline_rand(obfuscation_ids: Sequence[int], rng: np.random.Generator) -> int:
    if len(obfuscation_ids) == 0:
        raise DegenerateInputError("empty obfuscation video set")
    return int(obfuscation_ids[int(rng.integers(len(obfuscation_ids)))])


def bias_probabilities(reward_profile: np.ndarray) -> np.ndarray:
    """Selection probabilities proportional to the positive part of the profile."""
    profile = np.clip(np.asarray(reward_profile, dtype=np.float64), 0.0, None)
    if profile.size == 0:
        raise DegenerateInputError("empty obfuscation video set")
    total = profile.sum()
    if total <= 0:
        return np.full(profile.size, 1.0 / profile.size)
    return profile / total


class BiasObfuscator(Obfuscator):
    name = "bias"

    def __init__(self, reward_profile: np.ndarray):
        super().__init__(len(reward_profile))
        self.probabilities = bias_probabilities(reward_profile)

    def select(self, state, context, rng):
        return int(rng.choice(self.n_actions, p=self.probabilities)), None


def baseline_bias(obfuscation_ids: Sequence[int], reward_profile: np.ndarray, rng: np.random.Generator) -> int:
    probs = bias_probabilities(reward_profile)
    if probs.size != len(obfuscation_ids):
        raise DegenerateInputError("reward profile must have one entry per obfuscation video")
    return int(obfuscation_ids[int(rng.choice(probs.size, p=probs))])


def build_reward_profile(
    personas: Sequence,
    env: Environment,
    obfuscation_ids: Sequence[int],
    alpha: float,
    epochs: int,
    seed: int,
    reward_metric: RewardMetric = privacy_reward,
) -> np.ndarray:
    """Accumulated reward per obfuscation video over `epochs` passes of uniform obfuscation."""
    profile = np.zeros(len(obfuscation_ids))
    rand = RandObfuscator(len(obfuscation_ids))
    seeds = np.random.SeedSequence(seed).generate_state(epochs)
    for epoch, epoch_seed in enumerate(seeds, start=1):
        for result in run_episodes(rand, personas, env, alpha, int(epoch_seed), obfuscation_ids, reward_metric):
            np.add.at(profile, result.trajectory.actions, result.trajectory.rewards)
        logger.debug("bias profile epoch %d/%d, positive mass %.4f", epoch, epochs, np.clip(profile, 0, None).sum())
    logger.info("Built bias reward profile over %d epochs (%d of %d videos with positive reward)",
                epochs, int((profile > 0).sum()), profile.size)
    return profile


class PBoosterObfuscator(Obfuscator):
    """
    Greedy one-step maximizer of the reward, evaluated on the context's
    environment over a random subsample of candidates. Ties go to the lowest
    video id.
    """

    name = "pbooster"

    def __init__(self, n_actions: int, candidates: int = 64):
        super().__init__(n_actions)
        self.candidates = candidates

    def select(self, state, context, rng):
        if self.n_actions <= self.candidates:
            pool = np.arange(self.n_actions)
        else:
            pool = np.sort(rng.choice(self.n_actions, size=self.candidates, replace=False))
        injected = [v for v, s in zip(state.played, state.sources) if s is Source.OBFUSCATION]
        trials = [context.persona_with(injected + [int(context.obfuscation_ids[i])]) for i in pool]
        gains = context.reward_value(trials)
        return int(pbooster_choice(pool, gains, context.obfuscation_ids)), None


def pbooster_choice(pool: np.ndarray, gains: np.ndarray, obfuscation_ids: np.ndarray) -> int:
    """Obfuscation-set index with the best gain among `pool`; ties resolve to the lowest video id."""
    gains = np.asarray(gains, dtype=np.float64)
    best = gains.max()
    tied = pool[gains == best]
    return int(tied[np.argmin(np.asarray(obfuscation_ids)[tied])])


def baseline_pbooster(obfuscation_ids: Sequence[int], state: MDPState, context: EpisodeContext) -> int:
    ids = np.asarray(obfuscation_ids, dtype=np.int64)
    if ids.size == 0:
        raise DegenerateInputError("empty obfuscation video set")
    greedy = PBoosterObfuscator(ids.size, candidates=ids.size)
    index, _ = greedy.select(state, context, np.random.default_rng(0))
    return int(ids[index])


class PolicyObfuscator(Obfuscator):
    name = "policy"

    def __init__(self, policy: PolicyNetwork, embeddings: np.ndarray, obfuscation_ids: Sequence[int],
                 greedy: bool = False):
        super().__init__(len(obfuscation_ids))
        self.policy = policy
        self.embeddings = embeddings
        self.obf_embeddings = embeddings[np.asarray(obfuscation_ids, dtype=np.int64)]
        self.greedy = greedy

    def select(self, state, context, rng):
        probs, memory = policy_distribution(self.policy, state.played, self.embeddings,
                                            self.obf_embeddings, state.lstm_hidden)
        if self.greedy:
            return int(np.argmax(probs)), memory
        return int(rng.choice(probs.size, p=probs)), memory


def make_obfuscator(name: str, n_actions: int, *, policy: Optional[PolicyNetwork] = None,
                    embeddings: Optional[np.ndarray] = None, obfuscation_ids: Optional[Sequence[int]] = None,
                    reward_profile: Optional[np.ndarray] = None, candidates: int = 64,
                    greedy: bool = False) -> Obfuscator:
    if name == RandObfuscator.name:
        return RandObfuscator(n_actions)
    if name == BiasObfuscator.name:
        if reward_profile is None:
            raise DegenerateInputError("bias obfuscator needs a reward profile")
        return BiasObfuscator(reward_profile)
    if name == PBoosterObfuscator.name:
        return PBoosterObfuscator(n_actions, candidates)
    if name == PolicyObfuscator.name:
        if policy is None or embeddings is None or obfuscation_ids is None:
            raise DegenerateInputError("policy obfuscator needs a policy, embeddings and the obfuscation set")
        return PolicyObfuscator(policy, embeddings, obfuscation_ids, greedy)
    raise ValueError(f"unknown obfuscator: {name}")
