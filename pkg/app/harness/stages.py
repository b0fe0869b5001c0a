"""
Pipeline stages.

Each stage reads what earlier stages left on the shared PipelineContext,
writes its artifacts under the run directory and returns them as a
{key: relative path} map. `load` restores the context from those files so
a completed stage can be skipped on a rerun.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.adversary.detectors import DeobfDetector, StealthDetector
from app.adversary.evaluation import (
    deobfuscate,
    evaluate_detector,
    evaluate_tagger,
    population_at_prevalence,
    precision_at_prevalence,
)
from app.adversary.training import stealth_examples, train_deobf_detector, train_stealth_detector
from app.corpus.bank import VideoBank, build_bank
from app.corpus.embedding import CorpusStats, compute_stats, embed_corpus
from app.corpus.generator import Corpus, generate_corpus
from app.corpus.store import load_corpus, save_corpus
from app.denoiser.model import DenoiserNetwork
from app.denoiser.training import DenoiserDataset, train_denoiser
from app.errors import DegenerateInputError
from app.harness import acceptance, experiments
from app.harness.artifacts import RunArtifacts
from app.harness.experiments import ObfuscationEvaluation
from app.harness.reports import curve_rows
from app.harness.tiny_world import mi_tiny_world_study
from app.metrics.divergence import kl_rows
from app.metrics.normalization import NormalizationConstants, estimate_norms
from app.obfuscator.a2c import train_a2c
from app.obfuscator.baselines import Obfuscator, build_reward_profile, make_obfuscator
from app.obfuscator.environments import Environment, SurrogateEnvironment, make_environment
from app.obfuscator.mdp import run_episodes
from app.obfuscator.policy import CriticNetwork, PolicyNetwork
from app.schemas import ExperimentConfig
from app.surrogate.model import SurrogateNetwork
from app.surrogate.training import train_surrogate
from app.world.calibration import CalibrationResult, calibrate_noise_temperature
from app.world.oracle import RecommendationWorld
from app.world.personas import Persona, generate_sock_puppets
from app.world.traces import export_personas, import_personas

logger = logging.getLogger(__name__)

OBFUSCATOR_NAMES = ("rand", "bias", "pbooster", "policy")


def stage_seed(base: int, name: str, *extra: int) -> int:
    """Stable per-purpose seed derived from the experiment seed."""
    entropy = [int(base), zlib.crc32(name.encode("utf-8")), *(int(e) for e in extra)]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


@dataclass
class PipelineContext:
    config: ExperimentConfig
    artifacts: RunArtifacts
    corpus: Optional[Corpus] = None
    embeddings: Optional[np.ndarray] = None
    stats: Optional[CorpusStats] = None
    world: Optional[RecommendationWorld] = None
    calibration: Optional[CalibrationResult] = None
    world_norms: Optional[NormalizationConstants] = None
    train_personas: List[Persona] = field(default_factory=list)
    eval_personas: List[Persona] = field(default_factory=list)
    train_targets: Optional[np.ndarray] = None
    bank: Optional[VideoBank] = None
    obfuscation_ids: Optional[np.ndarray] = None
    surrogate: Optional[SurrogateNetwork] = None
    surrogate_norms: Optional[NormalizationConstants] = None
    policy: Optional[PolicyNetwork] = None
    critic: Optional[CriticNetwork] = None
    bias_profile: Optional[np.ndarray] = None
    denoiser: Optional[DenoiserNetwork] = None
    evaluations: Dict[str, Dict[str, ObfuscationEvaluation]] = field(default_factory=dict)
    _environments: Dict[str, Environment] = field(default_factory=dict, repr=False)

    def seed(self, name: str, *extra: int) -> int:
        return stage_seed(self.config.seed, name, *extra)

    def require(self, attr: str):
        value = getattr(self, attr)
        if value is None or (isinstance(value, list) and not value):
            raise DegenerateInputError(f"'{attr}' is not available; run the stage that produces it first")
        return value

    def environment(self, kind: str) -> Environment:
        if kind not in self._environments:
            self._environments[kind] = make_environment(
                kind, world=self.world, surrogate=self.surrogate, embeddings=self.embeddings
            )
        return self._environments[kind]

    def norms_for(self, kind: str) -> Optional[NormalizationConstants]:
        return self.world_norms if kind == "world" else self.surrogate_norms

    def obfuscators(self) -> Dict[str, Obfuscator]:
        ids = self.require("obfuscation_ids")
        cfg = self.config
        return {
            name: make_obfuscator(
                name, ids.size, policy=self.policy, embeddings=self.embeddings, obfuscation_ids=ids,
                reward_profile=self.bias_profile, candidates=cfg.baselines.pbooster_candidates,
                greedy=cfg.a2c.greedy_eval,
            )
            for name in OBFUSCATOR_NAMES
        }

    # ----------------------------------------------------------
    def evaluation(self, kind: str) -> Dict[str, ObfuscationEvaluation]:
        """Held-out obfuscations on one environment: cached, then on disk, then computed."""
        if kind in self.evaluations:
            return self.evaluations[kind]
        files = [_evaluation_files(kind, name) for name in OBFUSCATOR_NAMES]
        if all(self.artifacts.exists(f) for f in files):
            self.evaluations[kind] = {name: _load_evaluation(self, kind, name) for name in OBFUSCATOR_NAMES}
            return self.evaluations[kind]
        evals = experiments.evaluate_obfuscators(
            self.obfuscators(), self.require("eval_personas"), self.environment(kind), self.config.a2c.alpha,
            self.seed("evaluation"), self.obfuscation_ids, measure_seed=self.seed("measure"),
        )
        for ev in evals.values():
            _persist_evaluation(self, ev)
        self.evaluations[kind] = evals
        return evals


def _evaluation_files(kind: str, name: str) -> Tuple[str, str]:
    return f"personas/eval_{kind}_{name}.jsonl", f"raw/eval_{kind}_{name}.npz"


def _persist_evaluation(ctx: PipelineContext, ev: ObfuscationEvaluation) -> Dict[str, str]:
    personas_rel, _ = _evaluation_files(ev.env, ev.obfuscator)
    export_personas(ctx.artifacts.resolve(personas_rel), ev.personas, with_sources=True)
    raw_rel = ctx.artifacts.write_arrays(f"eval_{ev.env}_{ev.obfuscator}", c_o=ev.c_o, c_u=ev.c_u,
                                         alpha=np.array(ev.alpha))
    return {f"{ev.env}_{ev.obfuscator}_personas": personas_rel, f"{ev.env}_{ev.obfuscator}_raw": raw_rel}


def _load_evaluation(ctx: PipelineContext, kind: str, name: str) -> ObfuscationEvaluation:
    personas_rel, _ = _evaluation_files(kind, name)
    personas = import_personas(ctx.artifacts.resolve(personas_rel), min_len=0).personas
    raw = ctx.artifacts.read_arrays(f"eval_{kind}_{name}")
    return ObfuscationEvaluation(kind, name, float(raw["alpha"]), personas, raw["c_o"], raw["c_u"])


def _ids(personas: List[Persona]) -> List[Tuple[int, ...]]:
    return [p.video_ids for p in personas]


# ──────────────────────────────────────────────────────────────
# Stages
# ──────────────────────────────────────────────────────────────
class BaseStage:
    """One step of the pipeline; `requires` names the stages that must run first."""

    name: str = ""
    requires: Tuple[str, ...] = ()

    def run(self, ctx: PipelineContext) -> Dict[str, str]:
        raise NotImplementedError

    def load(self, ctx: PipelineContext, artifacts: Dict[str, str]) -> None:
        """Restore the context from the stage's artifacts; studies have nothing to restore."""


class CorpusStage(BaseStage):
    name = "corpus"

    def run(self, ctx):
        cfg = ctx.config.corpus
        corpus = generate_corpus(cfg, ctx.seed(self.name))
        stats = compute_stats(corpus, cfg.content_dim)
        embeddings = embed_corpus(corpus, stats)
        directory = save_corpus(ctx.artifacts.directory("corpus"), corpus, embeddings, stats)
        ctx.corpus, ctx.embeddings, ctx.stats = corpus, embeddings, stats
        return {
            "corpus": ctx.artifacts.relative(directory / "corpus.jsonl"),
            "embeddings": ctx.artifacts.relative(directory / "embeddings.npy"),
            "stats": ctx.artifacts.relative(directory / "stats.json"),
        }

    def load(self, ctx, artifacts):
        ctx.corpus, ctx.embeddings, ctx.stats = load_corpus(ctx.artifacts.directory("corpus"))


class WorldStage(BaseStage):
    """Calibrate the world's refresh noise, then estimate its normalization constants."""

    name = "world"
    requires = ("corpus",)

    def run(self, ctx):
        config = ctx.config
        world = RecommendationWorld(ctx.require("corpus"), config.world)
        cal_personas = generate_sock_puppets(config.sock_puppet, world, config.calibration.n_personas,
                                             ctx.seed("calibration-personas"), prefix="cal")
        if config.calibration.enabled:
            calibration = calibrate_noise_temperature(world, _ids(cal_personas), config.calibration,
                                                      ctx.seed("calibration"))
            world = world.with_noise_temperature(calibration.noise_temperature)
        else:
            calibration = CalibrationResult(world.noise_temperature, float("nan"), 0, False)
        norms = estimate_norms(_ids(cal_personas), world, config.norm_refresh_samples, config.norm_pairs,
                               ctx.seed("world-norms"))
        ctx.world, ctx.calibration, ctx.world_norms = world, calibration, norms
        ctx._environments.clear()
        payload = {
            "calibration": {
                "noise_temperature": calibration.noise_temperature,
                "d_min": None if np.isnan(calibration.d_min) else calibration.d_min,
                "iterations": calibration.iterations,
                "converged": calibration.converged,
            },
            "norms": norms.model_dump(),
            "popular_filtered": int(world.popular_video_ids().size),
        }
        return {"world": ctx.artifacts.write_json("metrics", "world.json", payload)}

    def load(self, ctx, artifacts):
        raw = ctx.artifacts.read_json("metrics", "world.json")
        cal = raw["calibration"]
        ctx.calibration = CalibrationResult(
            float(cal["noise_temperature"]), float("nan") if cal["d_min"] is None else float(cal["d_min"]),
            int(cal["iterations"]), bool(cal["converged"]),
        )
        ctx.world = RecommendationWorld(ctx.require("corpus"), ctx.config.world).with_noise_temperature(
            ctx.calibration.noise_temperature
        )
        ctx.world_norms = NormalizationConstants.model_validate(raw["norms"])
        ctx._environments.clear()


class PersonaStage(BaseStage):
    """Sock-puppet personas, their C^u targets, the repopulation bank and the obfuscation video set."""

    name = "personas"
    requires = ("world",)

    def run(self, ctx):
        config = ctx.config
        world = ctx.require("world")
        train = generate_sock_puppets(config.sock_puppet, world, config.personas.train,
                                      ctx.seed("personas-train"), prefix="train")
        evals = generate_sock_puppets(config.sock_puppet, world, config.personas.eval,
                                      ctx.seed("personas-eval"), prefix="eval")
        target_seed = ctx.seed("targets")
        recs = [world.recommend(p.video_ids, seed=target_seed) for p in train]
        targets = np.stack([r.distribution for r in recs])
        bank = build_bank(ctx.require("corpus"), [r.video_ids for r in recs], config.corpus.bank_min,
                          config.corpus.bank_size)
        pool = {v for p in train for v in p.video_ids}
        if config.include_noisy_in_obfuscation_set:
            pool |= set(bank.noisy_videos)
        obfuscation_ids = np.asarray(sorted(pool), dtype=np.int64)
        logger.info("Obfuscation set: %d videos (%d from training personas)",
                    obfuscation_ids.size, len({v for p in train for v in p.video_ids}))

        ctx.train_personas, ctx.eval_personas = train, evals
        ctx.train_targets, ctx.bank, ctx.obfuscation_ids = targets, bank, obfuscation_ids
        art = ctx.artifacts
        export_personas(art.path("personas", "train.jsonl"), train)
        export_personas(art.path("personas", "eval.jsonl"), evals)
        return {
            "train": "personas/train.jsonl",
            "eval": "personas/eval.jsonl",
            "targets": art.write_arrays("train_targets", c_u=targets, obfuscation_ids=obfuscation_ids),
            "bank": art.write_json("personas", "bank.json", bank.to_json()),
        }

    def load(self, ctx, artifacts):
        art = ctx.artifacts
        ctx.train_personas = import_personas(art.path("personas", "train.jsonl"), min_len=0).personas
        ctx.eval_personas = import_personas(art.path("personas", "eval.jsonl"), min_len=0).personas
        raw = art.read_arrays("train_targets")
        ctx.train_targets, ctx.obfuscation_ids = raw["c_u"], raw["obfuscation_ids"]
        ctx.bank = VideoBank.from_json(art.read_json("personas", "bank.json"))


class SurrogateStage(BaseStage):
    name = "surrogate"
    requires = ("personas",)

    def run(self, ctx):
        config = ctx.config
        result = train_surrogate(_ids(ctx.require("train_personas")), ctx.train_targets, ctx.embeddings,
                                 config.surrogate, seed=ctx.seed(self.name))
        ctx.surrogate = result.model
        ctx._environments.pop("surrogate", None)
        norms = estimate_norms(_ids(ctx.require("eval_personas")), SurrogateEnvironment(result.model, ctx.embeddings),
                               config.norm_refresh_samples, config.norm_pairs, ctx.seed("surrogate-norms"))
        ctx.surrogate_norms = norms
        art = ctx.artifacts
        checkpoint = result.model.save(art.path("checkpoints", "surrogate.npz"),
                                       meta={"config_hash": art.config_hash, "test_loss": result.test_loss})
        summary = {
            "test_loss": result.test_loss,
            "uniform_baseline": result.uniform_baseline,
            "mean_baseline": result.mean_baseline,
            "beats_baselines": result.beats_baselines,
            "norms": norms.model_dump(),
        }
        return {
            "checkpoint": art.relative(checkpoint),
            "summary": art.write_json("metrics", "surrogate.json", summary),
            "curve": art.write_table("curves", "surrogate", curve_rows(result.curve, self.name)),
        }

    def load(self, ctx, artifacts):
        ctx.surrogate = SurrogateNetwork.load(ctx.artifacts.resolve(artifacts["checkpoint"]))
        raw = ctx.artifacts.read_json("metrics", "surrogate.json")
        ctx.surrogate_norms = NormalizationConstants.model_validate(raw["norms"])
        ctx._environments.pop("surrogate", None)


class ObfuscatorStage(BaseStage):
    """A2C training of the policy, plus the reward profile the bias baseline samples from."""

    name = "obfuscator"
    requires = ("surrogate",)

    def run(self, ctx):
        config = ctx.config
        env = ctx.environment(config.a2c.env)
        emb_dim = ctx.embeddings.shape[1]
        policy = PolicyNetwork(emb_dim, config.policy, seed=ctx.seed("policy"))
        critic = CriticNetwork(emb_dim, config.policy, seed=ctx.seed("critic"))
        result = train_a2c(policy, critic, env, ctx.require("train_personas"), ctx.obfuscation_ids,
                           ctx.embeddings, config.a2c, seed=ctx.seed("a2c"))
        profile = build_reward_profile(ctx.train_personas, env, ctx.obfuscation_ids, config.a2c.alpha,
                                       config.baselines.bias_epochs, ctx.seed("bias-profile"))
        ctx.policy, ctx.critic, ctx.bias_profile = result.policy, result.critic, profile
        art = ctx.artifacts
        meta = {"config_hash": art.config_hash, "env": config.a2c.env}
        return {
            "policy": art.relative(result.policy.save(art.path("checkpoints", "policy.npz"), meta)),
            "critic": art.relative(result.critic.save(art.path("checkpoints", "critic.npz"), meta)),
            "bias_profile": art.write_arrays("bias_profile", profile=profile),
            "curve": art.write_table("curves", "a2c", curve_rows(result.curve, "a2c")),
        }

    def load(self, ctx, artifacts):
        ctx.policy = PolicyNetwork.load(ctx.artifacts.resolve(artifacts["policy"]))
        ctx.critic = CriticNetwork.load(ctx.artifacts.resolve(artifacts["critic"]))
        ctx.bias_profile = ctx.artifacts.read_arrays("bias_profile")["profile"]


class EvaluationStage(BaseStage):
    """Privacy of every obfuscator on every evaluation environment."""

    name = "evaluation"
    requires = ("obfuscator",)

    def run(self, ctx):
        privacy, ttests = [], []
        out: Dict[str, str] = {}
        for kind in ctx.config.eval_envs:
            evals = ctx.evaluation(kind)
            for name in evals:
                personas_rel, raw_rel = _evaluation_files(kind, name)
                out[f"{kind}_{name}_personas"], out[f"{kind}_{name}_raw"] = personas_rel, raw_rel
            privacy.extend(experiments.privacy_rows(evals, ctx.norms_for(kind)))
            ttests.extend(experiments.ttest_rows(evals))
        out["privacy"] = ctx.artifacts.write_table("metrics", "privacy", privacy)
        out["ttests"] = ctx.artifacts.write_table("metrics", "privacy_ttests", ttests)
        return out

    def load(self, ctx, artifacts):
        for kind in ctx.config.eval_envs:
            ctx.evaluation(kind)


class DenoiserStage(BaseStage):
    """
    Train the denoiser on policy-obfuscated training personas against the
    world, then compare it with the surrogate-only and no-denoiser
    estimates for every obfuscator.
    """

    name = "denoiser"
    requires = ("evaluation",)

    def run(self, ctx):
        config = ctx.config
        env = ctx.environment("world")
        d_min = ctx.require("world_norms").d_min
        subset = ctx.require("train_personas")[:config.personas.denoiser]
        agent = ctx.obfuscators()["policy"]
        episodes = run_episodes(agent, subset, env, config.a2c.alpha, ctx.seed("denoiser-data"),
                                ctx.obfuscation_ids)
        obfuscated = [ep.persona for ep in episodes]
        c_o, c_u = experiments.measure_privacy(env, _ids(subset), _ids(obfuscated), ctx.seed("denoiser-measure"))
        data = DenoiserDataset.from_personas(obfuscated, c_o, c_u)
        result = train_denoiser(data, ctx.embeddings, config.denoiser, seed=ctx.seed(self.name), d_min=d_min)
        ctx.denoiser = result.model

        art = ctx.artifacts
        out = {
            "checkpoint": art.relative(result.model.save(art.path("checkpoints", "denoiser.npz"),
                                                         meta={"config_hash": art.config_hash})),
            "train_raw": art.write_arrays("denoiser_train", c_o=c_o, c_u=c_u, test_idx=result.test_idx),
            "curve": art.write_table("curves", "denoiser", curve_rows(result.curve, self.name)),
            "summary": art.write_json("metrics", "denoiser.json", {
                "u_loss": result.u_loss, "privacy": result.privacy, "u_gain_norm": result.u_gain_norm,
            }),
        }
        rows = []
        for name, ev in ctx.evaluation("world").items():
            estimates = experiments.denoiser_estimates(ev, ctx.embeddings, result.model, ctx.surrogate)
            rows.extend(experiments.utility_rows(ev, estimates, d_min))
            out[f"raw_{name}"] = art.write_arrays(
                f"utility_{name}", c_o=ev.c_o, c_u=ev.c_u,
                **{f"c_hat_{k}": v for k, v in estimates.items() if k != "none"},
            )
        out["utility"] = art.write_table("metrics", "utility", rows)
        return out

    def load(self, ctx, artifacts):
        ctx.denoiser = DenoiserNetwork.load(ctx.artifacts.resolve(artifacts["checkpoint"]))


class AdversaryStage(BaseStage):
    """Stealth and de-obfuscation attacks against every obfuscator on the world."""

    name = "adversary"
    requires = ("evaluation",)

    def run(self, ctx):
        config = ctx.config
        acfg = config.adversary
        env = ctx.environment("world")
        emb = ctx.embeddings
        subset = ctx.require("train_personas")[:config.personas.adversary]
        half = len(subset) // 2
        evaluations = ctx.evaluation("world")
        art = ctx.artifacts
        stealth_rows: List[Dict[str, object]] = []
        deobf_rows: List[Dict[str, object]] = []
        out: Dict[str, str] = {}

        for index, (name, obfuscator) in enumerate(ctx.obfuscators().items()):
            episodes = run_episodes(obfuscator, subset, env, config.a2c.alpha, ctx.seed("adversary-data", index),
                                    ctx.obfuscation_ids)
            obf_train = [ep.persona for ep in episodes]
            ev = evaluations[name]

            # persona-level stealth detector
            seqs, labels = stealth_examples(subset[:half], obf_train[half:], acfg.match_lengths)
            stealth = train_stealth_detector(seqs, labels, emb, acfg, seed=ctx.seed("stealth", index))
            test_seqs, test_labels = stealth_examples(ctx.eval_personas, ev.personas, acfg.match_lengths)
            balanced = evaluate_detector(stealth.model, test_seqs, test_labels, emb, acfg.threshold)
            tpr, fpr = balanced.report.recall, balanced.report.false_positive_rate
            positives = [s for s, y in zip(test_seqs, test_labels) if y == 1]
            negatives = [s for s, y in zip(test_seqs, test_labels) if y == 0]
            rng = np.random.default_rng(ctx.seed("prevalence", index))
            for prevalence in sorted({acfg.prevalence, *acfg.prevalence_curve}):
                if not positives or not negatives:
                    logger.warning("%s: cannot build a population at prevalence %.2f", name, prevalence)
                    break
                items, pop_labels = population_at_prevalence(positives, negatives, prevalence, rng)
                at = evaluate_detector(stealth.model, items, pop_labels, emb, acfg.threshold)
                bayes = None
                if tpr is not None and fpr is not None and (tpr > 0 or fpr > 0):
                    bayes = precision_at_prevalence(tpr, fpr, prevalence)
                stealth_rows.append({"obfuscator": name, "alpha": config.a2c.alpha, "target_prevalence": prevalence,
                                     **at.report.to_row(), "bayes_precision": bayes})
            out[f"roc_{name}"] = art.write_table("curves", f"roc_{name}",
                                                 [{"obfuscator": name, **r} for r in balanced.roc])
            out[f"stealth_{name}"] = art.relative(stealth.model.save(
                art.path("checkpoints", f"stealth_{name}.npz"), meta={"config_hash": art.config_hash}))

            # per-video de-obfuscation tagger
            tagger = train_deobf_detector(obf_train, emb, acfg, seed=ctx.seed("deobf", index))
            tagged = evaluate_tagger(tagger.model, ev.personas, emb, acfg.threshold)
            filtered = [deobfuscate(p, tagger.model, emb, acfg.threshold) for p in ev.personas]
            keep = [i for i, r in enumerate(filtered) if len(r.persona) > 0]
            after = None
            if keep:
                c_f = env.distributions([filtered[i].persona.video_ids for i in keep],
                                        seed=ctx.seed("measure") + 1)
                after = float(kl_rows(c_f, ev.c_u[keep]).mean())
            if len(keep) < len(filtered):
                logger.warning("%s: %d personas were filtered down to nothing", name, len(filtered) - len(keep))
            deobf_rows.append({
                "obfuscator": name,
                "alpha": config.a2c.alpha,
                **tagged.report.to_row(),
                "privacy_before": ev.privacy,
                "privacy_after": after,
                "collateral_damage": float(np.mean([r.collateral_damage for r in filtered])),
                "emptied": len(filtered) - len(keep),
            })
            out[f"deobf_{name}"] = art.relative(tagger.model.save(
                art.path("checkpoints", f"deobf_{name}.npz"), meta={"config_hash": art.config_hash}))
            out[f"raw_{name}"] = art.write_arrays(f"adversary_{name}", stealth_scores=balanced.scores,
                                                  stealth_labels=balanced.labels, tagger_scores=tagged.scores,
                                                  tagger_labels=tagged.labels)

        out["stealth"] = art.write_table("metrics", "stealth", stealth_rows)
        out["deobfuscation"] = art.write_table("metrics", "deobfuscation", deobf_rows)
        return out

    def load(self, ctx, artifacts):
        for name in OBFUSCATOR_NAMES:
            StealthDetector.load(ctx.artifacts.resolve(artifacts[f"stealth_{name}"]))
            DeobfDetector.load(ctx.artifacts.resolve(artifacts[f"deobf_{name}"]))


class SweepStage(BaseStage):
    name = "sweep"
    requires = ("denoiser",)

    def run(self, ctx):
        rows = experiments.sweep_alpha(ctx)
        return {"sweep": ctx.artifacts.write_table("metrics", "sweep_alpha", rows)}


class PersonalizationStage(BaseStage):
    name = "personalization"
    requires = ("obfuscator",)

    def run(self, ctx):
        if not ctx.config.personalization.enabled:
            logger.info("Personalization disabled; nothing to do")
            return {}
        rows = experiments.personalization_study(ctx)
        return {"personalization": ctx.artifacts.write_table("metrics", "personalization", rows)}


class TinyWorldStage(BaseStage):
    name = "mi_study"

    def run(self, ctx):
        report = mi_tiny_world_study(ctx.config.tiny_world)
        return {"mi_study": ctx.artifacts.write_table("metrics", "mi_tiny_world", report.rows())}


class AcceptanceStage(BaseStage):
    """Directional checks over the finished tables; failures are reported, not raised."""

    name = "acceptance"
    requires = ("sweep", "personalization")

    def run(self, ctx):
        results = acceptance.run_checks(ctx.artifacts.directory("metrics"), ctx.config.acceptance,
                                        lam=ctx.config.personalization.lam)
        return {"acceptance": ctx.artifacts.write_table("metrics", "acceptance", [r.row() for r in results])}


STAGES: Tuple[BaseStage, ...] = (
    CorpusStage(),
    WorldStage(),
    PersonaStage(),
    SurrogateStage(),
    ObfuscatorStage(),
    EvaluationStage(),
    DenoiserStage(),
    AdversaryStage(),
    SweepStage(),
    PersonalizationStage(),
    TinyWorldStage(),
    AcceptanceStage(),
)
CORE_STAGES = ("corpus", "world", "personas", "surrogate", "obfuscator", "evaluation", "denoiser", "adversary")
STUDY_STAGES = ("sweep", "personalization", "mi_study", "acceptance")
