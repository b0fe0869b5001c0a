"""
Exhaustive information study on a world small enough to enumerate.

Random variables (joint axes):
    0  V^u   user persona, uniform over all sequences of `persona_length`
    1  V^o   obfuscated persona from a fixed stochastic obfuscator
    2  C^o   recommendation outcome for V^o
    3  C^u   recommendation outcome for V^u

The tiny obfuscator injects at most one video before each user video:
with probability alpha it plays a uniformly chosen video first. The world
draws a latent trending class shared by both recommendation outcomes, then
`n_draws` recommended classes per persona. Outcomes are class-count vectors
divided by `n_draws`.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax, xlogy
from scipy.stats import multinomial

from app.metrics.information import (
    Joint,
    SparseJoint,
    conditional_mutual_information,
    discrete_mutual_information,
    entropy,
    validate_joint,
)
from app.schemas import TinyWorldConfig

logger = logging.getLogger(__name__)

VU, VO, CO, CU = 0, 1, 2, 3
CHAIN_RULE_TOLERANCE = 1e-9


def compositions(total: int, parts: int) -> List[Tuple[int, ...]]:
    """All non-negative integer vectors of length `parts` summing to `total`, lexicographic."""
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out


class TinyWorld:
    def __init__(self, config: TinyWorldConfig):
        self.config = config
        v, k = config.n_videos, config.n_classes
        m = np.zeros((v, k))
        for video in range(v):
            m[video, video % k] = 1.0
            if video >= k:
                m[video, (video + 1) % k] = 0.5
        self.memberships = m / m.sum(axis=1, keepdims=True)
        self.stochastic = not config.deterministic
        self._cache: Dict[Tuple[Tuple[int, ...], Optional[int]], np.ndarray] = {}
        if self.stochastic:
            counts = compositions(config.n_draws, k)
            self.outcomes = np.asarray(counts, dtype=np.float64) / config.n_draws
            self._counts = np.asarray(counts, dtype=np.int64)
        else:
            self.outcomes = np.zeros((0, k))
            self._keys: Dict[Tuple[float, ...], int] = {}

    # ----------------------------------------------------------
    def trends(self) -> List[Tuple[Optional[int], float]]:
        if not self.stochastic or self.config.trend_boost == 0:
            return [(None, 1.0)]
        k = self.config.n_classes
        return [(z, 1.0 / k) for z in range(k)]

    def class_probs(self, persona: Sequence[int], trend: Optional[int]) -> np.ndarray:
        ids = np.asarray(persona, dtype=np.int64)
        weights = self.config.affinity_decay ** np.arange(ids.size - 1, -1, -1, dtype=np.float64)
        affinity = weights @ self.memberships[ids]
        affinity = affinity / affinity.sum()
        logits = np.log(affinity + self.config.smoothing)
        if trend is not None:
            logits[trend] += self.config.trend_boost
        return softmax(logits)

    def _outcome_index(self, dist: np.ndarray) -> int:
        key = tuple(np.round(dist, 12))
        if key not in self._keys:
            self._keys[key] = len(self._keys)
            self.outcomes = np.vstack([self.outcomes, dist[None, :]])
        return self._keys[key]

    def outcome_probs(self, persona: Sequence[int], trend: Optional[int]) -> np.ndarray:
        """P(outcome | persona, trend) as a dense vector over the outcome list."""
        key = (tuple(persona), trend)
        if key not in self._cache:
            q = self.class_probs(persona, trend)
            if self.stochastic:
                self._cache[key] = multinomial.pmf(self._counts, self.config.n_draws, q)
            else:
                self._cache[key] = np.array([float(self._outcome_index(q))])
        return self._cache[key]

    def obfuscations(self, user: Tuple[int, ...]) -> Dict[Tuple[int, ...], float]:
        """P(V^o | V^u) under the one-injection-per-slot obfuscator."""
        alpha, n_videos = self.config.alpha, self.config.n_videos
        out: Dict[Tuple[int, ...], float] = {}
        for mask in product((False, True), repeat=len(user)):
            k = sum(mask)
            p_mask = alpha ** k * (1.0 - alpha) ** (len(user) - k)
            if p_mask == 0.0:
                continue
            for injected in product(range(n_videos), repeat=k):
                persona: List[int] = []
                picks = iter(injected)
                for video, inject in zip(user, mask):
                    if inject:
                        persona.append(next(picks))
                    persona.append(video)
                key = tuple(persona)
                out[key] = out.get(key, 0.0) + p_mask / n_videos ** k
        return out


# ──────────────────────────────────────────────────────────────
# Joint table
# ──────────────────────────────────────────────────────────────
@dataclass
class TinyJoint:
    joint: SparseJoint
    user_personas: List[Tuple[int, ...]]
    obfuscated_personas: List[Tuple[int, ...]]
    outcomes: np.ndarray


def _outcome_cells(world: TinyWorld, persona: Tuple[int, ...], trend: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Outcome indices with non-zero probability and their probabilities."""
    probs = world.outcome_probs(persona, trend)
    if not world.stochastic:
        return probs.astype(np.int64), np.ones(1)
    idx = np.flatnonzero(probs)
    return idx, probs[idx]


def build_joint(config: TinyWorldConfig) -> TinyJoint:
    world = TinyWorld(config)
    users = list(product(range(config.n_videos), repeat=config.persona_length))
    obf_given_user = [world.obfuscations(u) for u in users]
    obf_index: Dict[Tuple[int, ...], int] = {}
    for table in obf_given_user:
        for vo in table:
            obf_index.setdefault(vo, len(obf_index))

    trends = world.trends()
    if not world.stochastic:
        # register every reachable outcome before sizing the table
        for persona in list(users) + list(obf_index):
            world.outcome_probs(persona, None)
    n_out = world.outcomes.shape[0]

    coords: List[np.ndarray] = []
    mass: List[np.ndarray] = []
    p_user = 1.0 / len(users)
    for i, user in enumerate(users):
        for vo, p_vo in obf_given_user[i].items():
            j = obf_index[vo]
            for trend, p_trend in trends:
                o_idx, o_p = _outcome_cells(world, vo, trend)
                u_idx, u_p = _outcome_cells(world, user, trend)
                co, cu = np.meshgrid(o_idx, u_idx, indexing="ij")
                coords.append(np.column_stack([np.full(co.size, i), np.full(co.size, j), co.ravel(), cu.ravel()]))
                mass.append(p_user * p_vo * p_trend * np.outer(o_p, u_p).ravel())
    probs = np.concatenate(mass)
    # remove float drift so the table validates
    probs /= probs.sum()
    joint = SparseJoint.from_cells(np.concatenate(coords), probs, (len(users), len(obf_index), n_out, n_out))
    logger.info("Tiny-world joint: %d user personas, %d obfuscated personas, %d outcomes, %d non-zero cells",
                len(users), len(obf_index), n_out, joint.probs.size)
    return TinyJoint(joint=joint, user_personas=users,
                     obfuscated_personas=sorted(obf_index, key=obf_index.get), outcomes=world.outcomes.copy())


def bayes_loss(joint: Joint, outcomes: np.ndarray, given: Sequence[int]) -> float:
    """
    Expected KL(C^u || E[C^u | X]) where X is the variable group `given`;
    the posterior mean is the optimal predictor under this loss.
    """
    joint = validate_joint(joint)
    given = tuple(given)
    cu = joint.coords[:, CU]
    if given:
        keys = np.ravel_multi_index(tuple(joint.coords[:, given].T), tuple(joint.shape[a] for a in given))
        _, group = np.unique(keys, return_inverse=True)
        group = group.ravel()
    else:
        group = np.zeros(cu.size, dtype=np.int64)
    p_x = np.bincount(group, weights=joint.probs)
    mean = np.zeros((p_x.size, outcomes.shape[1]))
    np.add.at(mean, group, joint.probs[:, None] * outcomes[cu])
    mean /= p_x[:, None]
    self_term = xlogy(outcomes, outcomes).sum(axis=1)
    cross = xlogy(outcomes[cu], mean[group]).sum(axis=1)
    return float(joint.probs @ (self_term[cu] - cross))


# ──────────────────────────────────────────────────────────────
# Report
# ──────────────────────────────────────────────────────────────
@dataclass
class MIReport:
    entropy_cu: float
    mi_user_cu: float
    mi_full: float
    mi_observed: float
    mi_secret: float
    chain_residual: float
    loss_observed: float
    loss_full: float
    loss_user_only: float

    @property
    def chain_rule_holds(self) -> bool:
        return self.chain_residual <= CHAIN_RULE_TOLERANCE

    @property
    def secret_input_helps(self) -> bool:
        """The denoiser's extra input V^u strictly lowers the optimal loss."""
        return self.loss_full < self.loss_observed

    @property
    def observation_helps(self) -> bool:
        """Seeing (V^o, C^o) strictly improves on a predictor from V^u alone."""
        return self.loss_full < self.loss_user_only

    def rows(self) -> List[Dict[str, object]]:
        values = asdict(self)
        values.update(
            chain_rule_holds=self.chain_rule_holds,
            secret_input_helps=self.secret_input_helps,
            observation_helps=self.observation_helps,
        )
        return [{"quantity": k, "value": v} for k, v in values.items()]


def analyze_joint(joint: Joint, outcomes: np.ndarray) -> MIReport:
    mi_full = discrete_mutual_information(joint, CU, (VU, VO, CO))
    mi_observed = discrete_mutual_information(joint, CU, (VO, CO))
    mi_secret = conditional_mutual_information(joint, CU, VU, (VO, CO))
    return MIReport(
        entropy_cu=entropy(joint, CU),
        mi_user_cu=discrete_mutual_information(joint, VU, CU),
        mi_full=mi_full,
        mi_observed=mi_observed,
        mi_secret=mi_secret,
        chain_residual=abs(mi_full - (mi_observed + mi_secret)),
        loss_observed=bayes_loss(joint, outcomes, (VO, CO)),
        loss_full=bayes_loss(joint, outcomes, (VU, VO, CO)),
        loss_user_only=bayes_loss(joint, outcomes, (VU,)),
    )


def mi_tiny_world_study(config: TinyWorldConfig) -> MIReport:
    tiny = build_joint(config)
    report = analyze_joint(tiny.joint, tiny.outcomes)
    logger.info(
        "Tiny world: I(C^u;V^u,V^o,C^o)=%.6f chain residual=%.2e loss(C^o,V^o)=%.6f loss(+V^u)=%.6f loss(V^u)=%.6f",
        report.mi_full, report.chain_residual, report.loss_observed, report.loss_full, report.loss_user_only,
    )
    if not report.chain_rule_holds:
        logger.warning("Chain rule residual %.3e exceeds %.0e", report.chain_residual, CHAIN_RULE_TOLERANCE)
    return report
