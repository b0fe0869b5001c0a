"""
Evaluation building blocks and the follow-up studies that run on top of a
finished pipeline: the obfuscation-budget sweep and the personalization study.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Sequence

import numpy as np

from app.denoiser.training import DenoiserDataset, predict_dataset
from app.harness.reports import paired_test, summary
from app.metrics.divergence import PersonalizationSpec, kl_rows, personalized_components, privacy_norm
from app.metrics.normalization import NormalizationConstants
from app.obfuscator.a2c import train_a2c
from app.obfuscator.baselines import Obfuscator, PolicyObfuscator
from app.obfuscator.environments import Environment
from app.obfuscator.mdp import personalized_reward, run_episodes
from app.obfuscator.policy import CriticNetwork, PolicyNetwork
from app.surrogate.training import predict_batch
from app.world.personas import Persona

if TYPE_CHECKING:
    from app.harness.stages import PipelineContext

logger = logging.getLogger(__name__)

REFERENCE_OBFUSCATOR = PolicyObfuscator.name


@dataclass
class ObfuscationEvaluation:
    env: str
    obfuscator: str
    alpha: float
    personas: List[Persona]
    c_o: np.ndarray
    c_u: np.ndarray

    @property
    def kl(self) -> np.ndarray:
        return kl_rows(self.c_o, self.c_u)

    @property
    def privacy(self) -> float:
        return float(self.kl.mean())

    @property
    def injections(self) -> np.ndarray:
        return np.array([p.obfuscation_count() for p in self.personas], dtype=np.float64)


def measure_privacy(env: Environment, user_personas: Sequence[Sequence[int]],
                    obfuscated: Sequence[Sequence[int]], seed: int):
    """
    (C^o, C^u) for aligned persona lists. The two queries use different
    refresh seeds, so a stochastic world contributes its own noise floor.
    """
    c_u = env.distributions(list(user_personas), seed=seed)
    c_o = env.distributions(list(obfuscated), seed=seed + 1)
    return c_o, c_u


def evaluate_obfuscators(obfuscators: Mapping[str, Obfuscator], personas: Sequence[Persona], env: Environment,
                         alpha: float, seed: int, obfuscation_ids: Sequence[int],
                         measure_seed: int) -> Dict[str, ObfuscationEvaluation]:
    """
    Obfuscate every persona with every obfuscator. All obfuscators share
    the episode seeds, hence the injection schedules, and the C^u draws.
    """
    users = [p.video_ids for p in personas]
    out: Dict[str, ObfuscationEvaluation] = {}
    for name, obfuscator in obfuscators.items():
        episodes = run_episodes(obfuscator, personas, env, alpha, seed, obfuscation_ids)
        obfuscated = [ep.persona for ep in episodes]
        c_o, c_u = measure_privacy(env, users, [p.video_ids for p in obfuscated], measure_seed)
        out[name] = ObfuscationEvaluation(env.name, name, alpha, obfuscated, c_o, c_u)
        logger.info("%s/%s alpha=%.2f: P=%.4f over %d personas", env.name, name, alpha,
                    out[name].privacy, len(obfuscated))
    return out


def _norm(value: float, norms: Optional[NormalizationConstants]) -> Optional[float]:
    if norms is None or not norms.is_usable:
        return None
    return privacy_norm(value, norms)


def privacy_rows(evaluations: Mapping[str, ObfuscationEvaluation],
                 norms: Optional[NormalizationConstants]) -> List[Dict[str, object]]:
    rows = []
    for name, ev in evaluations.items():
        stats = summary(ev.kl)
        rows.append({
            "env": ev.env,
            "obfuscator": name,
            "alpha": ev.alpha,
            "privacy": stats["value"],
            "privacy_stderr": stats["stderr"],
            "privacy_norm": _norm(stats["value"], norms),
            "n": stats["n"],
            "mean_injections": float(ev.injections.mean()),
        })
    return rows


def ttest_rows(evaluations: Mapping[str, ObfuscationEvaluation],
               reference: str = REFERENCE_OBFUSCATOR) -> List[Dict[str, object]]:
    if reference not in evaluations:
        return []
    ref = evaluations[reference]
    rows = []
    for name, ev in evaluations.items():
        if name == reference:
            continue
        rows.append({"env": ref.env, "alpha": ref.alpha, "obfuscator": reference, "baseline": name,
                     **paired_test(ref.kl, ev.kl)})
    return rows


# ──────────────────────────────────────────────────────────────
# Denoising
# ──────────────────────────────────────────────────────────────
def denoiser_estimates(ev: ObfuscationEvaluation, embeddings: np.ndarray, denoiser=None,
                       surrogate=None) -> Dict[str, np.ndarray]:
    """C^u estimates per denoiser: none (use C^o), surrogate (V^u only) and the trained denoiser."""
    out = {"none": ev.c_o}
    if surrogate is not None:
        out["surrogate"] = predict_batch(surrogate, [p.user_videos() for p in ev.personas], embeddings)
    if denoiser is not None:
        data = DenoiserDataset.from_personas(ev.personas, ev.c_o, ev.c_u)
        out["denoiser"] = predict_dataset(denoiser, data, embeddings)
    return out


def utility_rows(ev: ObfuscationEvaluation, estimates: Mapping[str, np.ndarray],
                 d_min: Optional[float]) -> List[Dict[str, object]]:
    p = ev.privacy
    rows = []
    for name, c_hat in estimates.items():
        stats = summary(kl_rows(c_hat, ev.c_u))
        gain = None
        if d_min is not None and p != d_min:
            gain = (p - stats["value"]) / (p - d_min)
        rows.append({
            "obfuscator": ev.obfuscator,
            "denoiser": name,
            "alpha": ev.alpha,
            "privacy": p,
            "u_loss": stats["value"],
            "u_loss_stderr": stats["stderr"],
            "u_gain_norm": gain,
            "n": stats["n"],
        })
    return rows


# ──────────────────────────────────────────────────────────────
# Studies
# ──────────────────────────────────────────────────────────────
def sweep_alpha(ctx: "PipelineContext", alphas: Optional[Sequence[float]] = None) -> List[Dict[str, object]]:
    """
    Privacy/utility trade-off over obfuscation budgets on the world, with
    alpha=0 as the no-obfuscation anchor. Every obfuscator is paired with
    each denoiser (none, surrogate, trained).
    """
    config = ctx.config
    budgets = sorted({0.0, *(alphas if alphas is not None else config.alphas)})
    env = ctx.environment("world")
    seed = ctx.seed("sweep")
    rows: List[Dict[str, object]] = []
    for alpha in budgets:
        evaluations = evaluate_obfuscators(ctx.obfuscators(), ctx.eval_personas, env, alpha, seed,
                                           ctx.obfuscation_ids, measure_seed=ctx.seed("measure"))
        for name, ev in evaluations.items():
            estimates = denoiser_estimates(ev, ctx.embeddings, ctx.denoiser, ctx.surrogate)
            norm = _norm(ev.privacy, ctx.world_norms)
            for row in utility_rows(ev, estimates, ctx.world_norms.d_min):
                rows.append({**row, "privacy_norm": norm})
    for violation in monotonicity_violations(rows):
        logger.warning("P^Norm decreases for %s between alpha=%.2f and alpha=%.2f", *violation)
    return rows


def monotonicity_violations(rows: Sequence[Mapping], tolerance: float = 0.0):
    """(obfuscator, alpha_lo, alpha_hi) pairs where privacy drops as the budget grows."""
    by_obf: Dict[str, Dict[float, float]] = {}
    for row in rows:
        by_obf.setdefault(row["obfuscator"], {})[row["alpha"]] = row["privacy"]
    out = []
    for name, series in by_obf.items():
        alphas = sorted(series)
        for lo, hi in zip(alphas, alphas[1:]):
            if series[hi] + tolerance < series[lo]:
                out.append((name, lo, hi))
    return out


def personalization_components(env: Environment, personas: Sequence[Persona], obfuscator: Obfuscator,
                               alpha: float, seed: int, obfuscation_ids: Sequence[int],
                               spec: PersonalizationSpec, measure_seed: int) -> Dict[str, float]:
    episodes = run_episodes(obfuscator, personas, env, alpha, seed, obfuscation_ids)
    c_o, c_u = measure_privacy(env, [p.video_ids for p in personas],
                               [ep.persona.video_ids for ep in episodes], measure_seed)
    d_nonsens, d_sens = personalized_components(c_o, c_u, spec)
    return {"d_nonsens": float(d_nonsens.mean()), "d_sens": float(d_sens.mean()),
            "privacy": float(kl_rows(c_o, c_u).mean())}


def personalization_study(ctx: "PipelineContext", lams: Optional[Sequence[float]] = None) -> List[Dict[str, object]]:
    """
    Train one personalized policy per lambda and compare its D_nonsens /
    D_sens against the standard policy on the held-out personas.
    """
    config = ctx.config
    pcfg = config.personalization
    sensitive = pcfg.resolve_sensitive(config.corpus.n_classes)
    lam_values = sorted({pcfg.lam, *(lams if lams is not None else pcfg.lambda_sweep)})
    env = ctx.environment(config.a2c.env)
    alpha = config.a2c.alpha
    eval_seed, measure_seed = ctx.seed("personalization-eval"), ctx.seed("measure")

    reference_spec = PersonalizationSpec.create(sensitive, config.corpus.n_classes, pcfg.lam, pcfg.epsilon)
    standard = personalization_components(env, ctx.eval_personas, ctx.obfuscators()[REFERENCE_OBFUSCATOR], alpha,
                                          eval_seed, ctx.obfuscation_ids, reference_spec, measure_seed)
    rows: List[Dict[str, object]] = [{"policy": "standard", "lam": None, **standard, "d_sens_reduction": 0.0}]
    for lam in lam_values:
        spec = PersonalizationSpec.create(sensitive, config.corpus.n_classes, lam, pcfg.epsilon)
        emb_dim = ctx.embeddings.shape[1]
        policy = PolicyNetwork(emb_dim, config.policy, seed=ctx.seed("personalized-policy", int(lam * 1000)))
        critic = CriticNetwork(emb_dim, config.policy, seed=ctx.seed("personalized-critic", int(lam * 1000)))
        train_a2c(policy, critic, env, ctx.train_personas, ctx.obfuscation_ids, ctx.embeddings, config.a2c,
                  seed=ctx.seed("personalized-a2c", int(lam * 1000)), reward_metric=personalized_reward(spec))
        agent = PolicyObfuscator(policy, ctx.embeddings, ctx.obfuscation_ids, greedy=config.a2c.greedy_eval)
        comps = personalization_components(env, ctx.eval_personas, agent, alpha, eval_seed,
                                           ctx.obfuscation_ids, spec, measure_seed)
        reduction = None
        if standard["d_sens"] > 0:
            reduction = 1.0 - comps["d_sens"] / standard["d_sens"]
        rows.append({"policy": "personalized", "lam": lam, **comps, "d_sens_reduction": reduction})
        logger.info("Personalized policy lam=%.2f: D_nonsens=%.4f D_sens=%.4f (standard D_sens=%.4f)",
                    lam, comps["d_nonsens"], comps["d_sens"], standard["d_sens"])
    return rows
