"""
The obfuscation MDP.

A persona is replayed in order; before each user video an obfuscation
video is injected with probability alpha, and the obfuscator picks which
one. The reward of the t-th injection is P_t - P_{t-1}, where P_t is the
privacy of the complete user persona with the first t injections applied.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.errors import DegenerateInputError
from app.metrics.divergence import PersonalizationSpec, kl_rows, personalized_components
from app.obfuscator.environments import Environment
from app.world.personas import Persona, Source

if TYPE_CHECKING:
    from app.obfuscator.baselines import Obfuscator

logger = logging.getLogger(__name__)

RewardMetric = Callable[[np.ndarray, np.ndarray], np.ndarray]


def privacy_reward(c_o: np.ndarray, c_u: np.ndarray) -> np.ndarray:
    """Row-wise KL(C^o || C^u) against one fixed C^u."""
    c_o = np.atleast_2d(c_o)
    return kl_rows(c_o, np.broadcast_to(c_u, c_o.shape))


def personalized_reward(spec: PersonalizationSpec) -> RewardMetric:
    def metric(c_o: np.ndarray, c_u: np.ndarray) -> np.ndarray:
        c_o = np.atleast_2d(c_o)
        d_nonsens, d_sens = personalized_components(c_o, np.broadcast_to(c_u, c_o.shape), spec)
        return d_nonsens - spec.lam * d_sens

    return metric


# ──────────────────────────────────────────────────────────────
# Injection scheduling
# ──────────────────────────────────────────────────────────────
def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise DegenerateInputError(f"alpha must satisfy 0 <= alpha < 1, got {alpha}")


def schedule_injection(alpha: float, step: int, rng: np.random.Generator) -> bool:
    """Bernoulli(alpha) draw for time step `step`."""
    _check_alpha(alpha)
    return bool(rng.random() < alpha)


def injection_schedule(n_user: int, alpha: float, rng: np.random.Generator) -> Tuple[Source, ...]:
    """Source tags of the whole episode; it always ends on the last user video."""
    _check_alpha(alpha)
    tags: List[Source] = []
    remaining = n_user
    step = 0
    while remaining > 0:
        if schedule_injection(alpha, step, rng):
            tags.append(Source.OBFUSCATION)
        else:
            tags.append(Source.USER)
            remaining -= 1
        step += 1
    return tuple(tags)


def expected_obfuscation_count(n_user: int, alpha: float) -> float:
    _check_alpha(alpha)
    return n_user * alpha / (1.0 - alpha)


def poisson_injection_rate(alpha: float, user_rate: float) -> float:
    """Rate of the obfuscation Poisson process for a user playing at `user_rate`."""
    _check_alpha(alpha)
    if user_rate <= 0:
        raise DegenerateInputError("user_rate must be positive")
    return user_rate * alpha / (1.0 - alpha)


@dataclass(frozen=True)
class LiveSchedule:
    user_times: Tuple[float, ...]
    obfuscation_times: Tuple[float, ...]

    def order(self) -> Tuple[Source, ...]:
        """Merged play order; a tie goes to the user video."""
        events = [(t, 0) for t in self.user_times] + [(t, 1) for t in self.obfuscation_times]
        return tuple(Source.USER if kind == 0 else Source.OBFUSCATION for _, kind in sorted(events))


def sample_live_schedule(user_times: Sequence[float], alpha: float, rng: np.random.Generator) -> LiveSchedule:
    """
    Draw obfuscation play times from a Poisson process over [0, last user play]
    whose rate keeps the expected obfuscation share at alpha.
    """
    times = np.sort(np.asarray(user_times, dtype=np.float64))
    if times.size == 0 or times[-1] <= 0:
        raise DegenerateInputError("need at least one user play at a positive time")
    horizon = float(times[-1])
    rate = poisson_injection_rate(alpha, times.size / horizon)
    count = int(rng.poisson(rate * horizon))
    obf = np.sort(rng.uniform(0.0, horizon, size=count))
    return LiveSchedule(tuple(float(t) for t in times), tuple(float(t) for t in obf))


# ──────────────────────────────────────────────────────────────
# Episodes
# ──────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class MDPState:
    played: Tuple[int, ...]
    sources: Tuple[Source, ...]
    step: int
    lstm_hidden: Any = None


@dataclass
class EpisodeContext:
    """What an obfuscator may consult while choosing; greedy baselines use `env`."""

    user_ids: Tuple[int, ...]
    schedule: Tuple[Source, ...]
    c_u: np.ndarray
    env: Environment
    reward_metric: RewardMetric
    seed: int
    obfuscation_ids: np.ndarray

    def persona_with(self, injected: Sequence[int]) -> Tuple[int, ...]:
        """Full user persona with only the first len(injected) injections applied."""
        out: List[int] = []
        users = iter(self.user_ids)
        t = 0
        for tag in self.schedule:
            if tag is Source.USER:
                out.append(next(users))
            elif t < len(injected):
                out.append(int(injected[t]))
                t += 1
            else:
                t += 1
        return tuple(out)

    def reward_value(self, personas: Sequence[Sequence[int]]) -> np.ndarray:
        dists = self.env.distributions(personas, seed=self.seed)
        return self.reward_metric(dists, self.c_u)


@dataclass
class Trajectory:
    positions: List[int] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    video_ids: List[int] = field(default_factory=list)
    rewards: np.ndarray = field(default_factory=lambda: np.zeros(0))
    privacy: np.ndarray = field(default_factory=lambda: np.zeros(1))
    values: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.actions)

    def returns(self, gamma: float) -> np.ndarray:
        out = np.zeros(len(self.rewards))
        running = 0.0
        for t in reversed(range(len(self.rewards))):
            running = self.rewards[t] + gamma * running
            out[t] = running
        return out

    def rows(self) -> List[dict]:
        return [
            {"step": t + 1, "position": self.positions[t], "video_id": self.video_ids[t],
             "reward": float(self.rewards[t]), "privacy": float(self.privacy[t + 1])}
            for t in range(len(self))
        ]


@dataclass
class EpisodeResult:
    persona: Persona
    trajectory: Trajectory
    c_u: np.ndarray

    @property
    def final_privacy(self) -> float:
        return float(self.trajectory.privacy[-1])


def _user_ids(user_persona) -> Tuple[int, ...]:
    if isinstance(user_persona, Persona):
        return user_persona.video_ids
    return tuple(int(v) for v in user_persona)


def run_episode(
    obfuscator: "Obfuscator",
    user_persona,
    env: Environment,
    alpha: float,
    seed: int,
    obfuscation_ids: Sequence[int],
    reward_metric: RewardMetric = privacy_reward,
    schedule: Optional[Sequence[Source]] = None,
) -> EpisodeResult:
    """
    Replay `user_persona` with injections chosen by `obfuscator`.

    The emitted persona's user subsequence is exactly the input persona.
    """
    user_ids = _user_ids(user_persona)
    if not user_ids:
        raise DegenerateInputError("cannot obfuscate an empty persona")
    obf_ids = np.asarray(obfuscation_ids, dtype=np.int64)
    if obf_ids.size == 0:
        raise DegenerateInputError("empty obfuscation video set")
    rng = np.random.default_rng(seed)
    tags = tuple(schedule) if schedule is not None else injection_schedule(len(user_ids), alpha, rng)
    if sum(1 for s in tags if s is Source.USER) != len(user_ids):
        raise DegenerateInputError("schedule does not match the persona length")

    c_u = env.distributions([user_ids], seed=seed)[0]
    context = EpisodeContext(user_ids, tags, c_u, env, reward_metric, seed, obf_ids)
    traj = Trajectory()
    played: List[int] = []
    sources: List[Source] = []
    memory = None
    users = iter(user_ids)
    for tag in tags:
        if tag is Source.USER:
            played.append(next(users))
            sources.append(Source.USER)
            continue
        state = MDPState(tuple(played), tuple(sources), len(traj.actions), memory)
        index, memory = obfuscator.select(state, context, rng)
        video = int(obf_ids[index])
        traj.positions.append(len(played))
        traj.actions.append(int(index))
        traj.video_ids.append(video)
        played.append(video)
        sources.append(Source.OBFUSCATION)

    p0 = reward_metric(c_u[None, :], c_u)
    if traj.actions:
        partial = [context.persona_with(traj.video_ids[:t]) for t in range(1, len(traj) + 1)]
        values = np.concatenate([p0, context.reward_value(partial)])
    else:
        values = p0
    traj.privacy = np.asarray(values, dtype=np.float64)
    traj.rewards = np.diff(traj.privacy)
    user_id = user_persona.user_id if isinstance(user_persona, Persona) else ""
    persona = Persona(tuple(played), tuple(sources), user_id)
    return EpisodeResult(persona=persona, trajectory=traj, c_u=c_u)


def episode_seeds(seed: int, count: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def run_episodes(
    obfuscator: "Obfuscator",
    personas: Sequence,
    env: Environment,
    alpha: float,
    seed: int,
    obfuscation_ids: Sequence[int],
    reward_metric: RewardMetric = privacy_reward,
) -> List[EpisodeResult]:
    seeds = episode_seeds(seed, len(personas))
    results = [
        run_episode(obfuscator, p, env, alpha, s, obfuscation_ids, reward_metric)
        for p, s in zip(personas, seeds)
    ]
    injected = sum(len(r.trajectory) for r in results)
    logger.debug("%s: %d episodes, %d injections (alpha=%.2f)", obfuscator.name, len(results), injected, alpha)
    return results
