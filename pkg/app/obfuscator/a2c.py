"""
Advantage actor-critic training of the obfuscation policy.

Episodes are rolled out with the current policy, then replayed in batches
through the policy and critic trunks:

    actor:  -log pi(a_t | s_t) * A_t  -  entropy_weight * H(pi(. | s_t))
    critic: 0.5 * (V(s_t) - G_t)^2,     A_t = G_t - V(s_t)

with G_t the discounted return from step t.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from app.diffnet.losses import log_softmax
from app.diffnet.optim import SGD
from app.errors import DegenerateInputError, TrainingDivergedError
from app.obfuscator.baselines import PolicyObfuscator
from app.obfuscator.environments import Environment
from app.obfuscator.mdp import EpisodeResult, RewardMetric, privacy_reward, run_episode
from app.obfuscator.policy import CriticNetwork, PolicyNetwork, action_logits, action_logits_backward, batch_windows
from app.schemas import A2CConfig

logger = logging.getLogger(__name__)


@dataclass
class A2CResult:
    policy: PolicyNetwork
    critic: CriticNetwork
    curve: List[Dict[str, float]] = field(default_factory=list)


@dataclass
class UpdateStats:
    actor_loss: float
    critic_loss: float
    mean_abs_advantage: float
    entropy: float
    steps: int


def _padded_returns(episodes: Sequence[EpisodeResult], steps: int, gamma: float) -> np.ndarray:
    out = np.zeros((steps, len(episodes)))
    for b, ep in enumerate(episodes):
        g = ep.trajectory.returns(gamma)
        out[:g.size, b] = g
    return out


def a2c_update(
    policy: PolicyNetwork,
    critic: CriticNetwork,
    actor_opt: SGD,
    critic_opt: SGD,
    episodes: Sequence[EpisodeResult],
    embeddings: np.ndarray,
    obf_embeddings: np.ndarray,
    config: A2CConfig,
) -> UpdateStats:
    """One actor and one critic step over a batch of finished episodes."""
    episodes = [ep for ep in episodes if len(ep.trajectory) > 0]
    if not episodes:
        raise DegenerateInputError("no obfuscation steps in the update batch")
    window = policy.config.window
    x, mask = batch_windows(embeddings, [(ep.persona.video_ids, ep.trajectory.positions) for ep in episodes], window)
    steps, batch = mask.shape
    n = mask.sum()

    actor_opt.zero_grad()
    critic_opt.zero_grad()
    targets = policy.forward_sequence(x, mask)
    logits = action_logits(targets, obf_embeddings, policy.config.cosine)
    log_pi = log_softmax(logits)
    pi = np.exp(log_pi)
    values = critic.forward_sequence(x, mask)[..., 0]

    returns = _padded_returns(episodes, steps, config.gamma)
    advantage = (returns - values) * mask
    mean_abs = float(np.abs(advantage).sum() / n)
    if not np.isfinite(mean_abs) or mean_abs > config.divergence_threshold:
        raise TrainingDivergedError(f"mean |advantage| {mean_abs:.4g} exceeds {config.divergence_threshold:.4g}")

    onehot = np.zeros_like(pi)
    for b, ep in enumerate(episodes):
        actions = ep.trajectory.actions
        onehot[np.arange(len(actions)), b, actions] = 1.0
    entropy = -np.sum(pi * log_pi, axis=-1)
    chosen_log_pi = np.sum(onehot * log_pi, axis=-1)

    m = mask[..., None]
    grad_logits = (
        -advantage[..., None] * (onehot - pi)
        + config.entropy_weight * pi * (log_pi + entropy[..., None])
    ) * m / n
    policy.backward_sequence(action_logits_backward(grad_logits, targets, obf_embeddings, policy.config.cosine))
    actor_opt.step()

    critic.backward_sequence(((values - returns) * mask / n)[..., None])
    critic_opt.step()

    return UpdateStats(
        actor_loss=float(-(chosen_log_pi * advantage).sum() / n - config.entropy_weight * (entropy * mask).sum() / n),
        critic_loss=float(0.5 * (advantage ** 2).sum() / n),
        mean_abs_advantage=mean_abs,
        entropy=float((entropy * mask).sum() / n),
        steps=int(n),
    )


def train_a2c(
    policy: PolicyNetwork,
    critic: CriticNetwork,
    env: Environment,
    personas: Sequence,
    obfuscation_ids: Sequence[int],
    embeddings: np.ndarray,
    config: A2CConfig,
    seed: int = 0,
    reward_metric: RewardMetric = privacy_reward,
) -> A2CResult:
    """
    Train for `config.epochs` passes; each pass uses every training persona once
    in a seeded order, updating after every `episodes_per_update` episodes.
    """
    if len(personas) == 0:
        raise DegenerateInputError("no training personas")
    obf_ids = np.asarray(obfuscation_ids, dtype=np.int64)
    obf_embeddings = embeddings[obf_ids]
    actor_opt = SGD(policy, config.actor_lr, config.momentum, config.max_grad_norm)
    critic_opt = SGD(critic, config.critic_lr, config.momentum, config.max_grad_norm)
    agent = PolicyObfuscator(policy, embeddings, obf_ids)

    curve: List[Dict[str, float]] = []
    for epoch in range(1, config.epochs + 1):
        epoch_seq = np.random.SeedSequence([seed, epoch])
        order = np.random.default_rng(epoch_seq).permutation(len(personas))
        episode_seeds = epoch_seq.generate_state(len(personas))
        returns, finals, stats = [], [], []
        for start in range(0, len(order), config.episodes_per_update):
            chunk = order[start:start + config.episodes_per_update]
            episodes = [
                run_episode(agent, personas[i], env, config.alpha, int(episode_seeds[i]), obf_ids, reward_metric)
                for i in chunk
            ]
            returns.extend(float(ep.trajectory.rewards.sum()) for ep in episodes)
            finals.extend(ep.final_privacy for ep in episodes)
            if any(len(ep.trajectory) for ep in episodes):
                stats.append(a2c_update(policy, critic, actor_opt, critic_opt, episodes,
                                        embeddings, obf_embeddings, config))
        weights = [s.steps for s in stats] or [1]

        def avg(attr: str) -> float:
            return float(np.average([getattr(s, attr) for s in stats], weights=weights)) if stats else 0.0

        row = {
            "epoch": epoch,
            "mean_return": float(np.mean(returns)),
            "mean_final_privacy": float(np.mean(finals)),
            "actor_loss": avg("actor_loss"),
            "critic_loss": avg("critic_loss"),
            "mean_abs_advantage": avg("mean_abs_advantage"),
            "entropy": avg("entropy"),
            "updates": len(stats),
        }
        curve.append(row)
        logger.info(
            "a2c epoch %d/%d return=%.5f privacy=%.5f |adv|=%.5f entropy=%.4f",
            epoch, config.epochs, row["mean_return"], row["mean_final_privacy"],
            row["mean_abs_advantage"], row["entropy"],
        )
    return A2CResult(policy=policy, critic=critic, curve=curve)
