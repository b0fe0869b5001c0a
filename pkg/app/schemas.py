"""
Pydantic configuration schemas.

Every model forbids unknown keys so a typo in a config file fails loudly
instead of silently falling back to a default.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.errors import ConfigError

CONFIG_FORMAT = 1
N_CATEGORIES = 18  # 17 categories + "none"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ──────────────────────────────────────────────────────────────
# Corpus / world
# ──────────────────────────────────────────────────────────────
class CorpusConfig(StrictModel):
    n_classes: int = Field(16, ge=2, description="K, number of video classes")
    n_videos: int = Field(4000, ge=2)
    class_priors: Optional[List[float]] = Field(
        None, description="Class mixture prior; None means uniform over K classes"
    )
    mixture_concentration: float = Field(5.0, gt=0, description="Dirichlet concentration around the prior")
    extra_membership_prob: float = Field(0.3, ge=0, le=1)
    vocab_size: int = Field(4000, ge=32)
    mean_tokens: int = Field(60, ge=1)
    topic_token_share: float = Field(0.6, ge=0, le=1)
    category_affinity: float = Field(0.7, ge=0, le=1, description="P(category follows the primary class)")
    popularity_log_mean: float = 8.0
    popularity_log_sigma: float = Field(1.5, gt=0)
    rating_mean: float = Field(3.8, ge=0, le=5)
    rating_std: float = Field(0.6, gt=0)
    content_dim: int = Field(32, ge=2, description="d_content; 384 reproduces the transformer width")
    bank_min: int = Field(50, ge=1)
    bank_size: Optional[int] = Field(None, ge=1)

    @field_validator("class_priors")
    @classmethod
    def _priors_valid(cls, v):
        if v is None:
            return v
        if len(v) == 0:
            raise ValueError("class_priors must not be empty")
        if any((not math.isfinite(p)) or p <= 0 for p in v):
            raise ValueError("class_priors must be positive and finite")
        return v

    @model_validator(mode="after")
    def _sizes(self):
        if self.n_videos < self.n_classes:
            raise ValueError(f"n_videos ({self.n_videos}) must be >= n_classes ({self.n_classes})")
        if self.class_priors is not None and len(self.class_priors) != self.n_classes:
            raise ValueError("class_priors must have one entry per class")
        return self

    def prior(self) -> List[float]:
        if self.class_priors is None:
            return [1.0 / self.n_classes] * self.n_classes
        total = sum(self.class_priors)
        return [p / total for p in self.class_priors]


class WorldConfig(StrictModel):
    affinity_decay: float = Field(0.9, gt=0, le=1)
    noise_temperature: float = Field(1.0, ge=0)
    popularity_weight: float = Field(0.5, ge=0)
    affinity_smoothing: float = Field(0.01, gt=0)
    recs_per_refresh: int = Field(20, ge=1)
    refreshes: int = Field(50, ge=1)
    popular_filter_quantile: float = Field(0.99, gt=0, le=1)


class SockPuppetConfig(StrictModel):
    depth: int = Field(10, ge=1, description="D, trail depth before reseeding")
    total: int = Field(40, ge=1, description="T, videos per persona")
    upnext_count: int = Field(20, ge=1)
    seed_decile: float = Field(0.1, gt=0, le=1, description="share of most popular videos used as walk seeds")


class CalibrationConfig(StrictModel):
    enabled: bool = True
    target_d_min: float = Field(0.49, gt=0)
    tolerance: float = Field(0.05, gt=0)
    n_personas: int = Field(200, ge=2)
    n_refresh_samples: int = Field(10, ge=2)
    max_iter: int = Field(20, ge=1)
    upper_bound: float = Field(8.0, gt=0)


class PersonaCounts(StrictModel):
    train: int = Field(2000, ge=10)
    eval: int = Field(400, ge=2)
    denoiser: int = Field(1000, ge=10, description="training personas reused for denoiser pairs")
    adversary: int = Field(400, ge=4, description="training personas reused for the balanced detector set")
    min_len: int = Field(40, ge=1)


# ──────────────────────────────────────────────────────────────
# Models / training
# ──────────────────────────────────────────────────────────────
class TrainingConfig(StrictModel):
    hidden_dim: int = Field(128, ge=1)
    epochs: int = Field(50, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(0.01, ge=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    test_fraction: float = Field(0.2, gt=0, lt=1)
    max_grad_norm: Optional[float] = Field(5.0, gt=0)


class PolicyConfig(StrictModel):
    conv_channels: int = Field(128, ge=1, description="m1")
    kernel: int = Field(3, ge=1)
    hidden_dim: int = Field(128, ge=1, description="m2 = m3")
    window: int = Field(40, ge=1, description="most recent videos fed to the conv layer")
    cosine: bool = Field(False, description="cosine similarity instead of raw inner products")

    @model_validator(mode="after")
    def _kernel_fits(self):
        if self.kernel > self.window:
            raise ValueError("kernel must not exceed window")
        return self


class A2CConfig(StrictModel):
    env: Literal["surrogate", "world"] = "surrogate"
    epochs: int = Field(50, ge=1)
    alpha: float = Field(0.2, ge=0, lt=1)
    gamma: float = Field(0.99, gt=0, le=1)
    entropy_weight: float = Field(0.01, ge=0)
    actor_lr: float = Field(1e-3, ge=0)
    critic_lr: float = Field(1e-3, ge=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    max_grad_norm: Optional[float] = Field(5.0, gt=0)
    divergence_threshold: float = Field(1e3, gt=0)
    episodes_per_update: int = Field(8, ge=1, description="episodes whose gradients are averaged per optimizer step")
    greedy_eval: bool = Field(False, description="take the argmax action instead of sampling at evaluation time")


class BaselineConfig(StrictModel):
    bias_epochs: int = Field(50, ge=1)
    pbooster_candidates: int = Field(64, ge=1)


class AdversaryConfig(StrictModel):
    hidden_dim: int = Field(64, ge=1)
    epochs: int = Field(20, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(0.01, ge=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    threshold: float = Field(0.5, gt=0, lt=1)
    prevalence: float = Field(0.05, gt=0, lt=1)
    prevalence_curve: List[float] = Field(default_factory=lambda: [0.01, 0.05, 0.10, 0.25, 0.50])
    match_lengths: bool = True
    max_grad_norm: Optional[float] = Field(5.0, gt=0)

    @field_validator("prevalence_curve")
    @classmethod
    def _curve(cls, v):
        if any(p <= 0 or p >= 1 for p in v):
            raise ValueError("prevalence values must lie in (0, 1)")
        return sorted(v)


class PersonalizationConfig(StrictModel):
    enabled: bool = True
    sensitive_classes: Optional[List[int]] = Field(
        None, description="None selects the last ~17.5% of classes (27 of 154)"
    )
    lam: float = Field(1.0, ge=0, description="weight of the sensitive divergence term")
    epsilon: float = Field(1e-4, gt=0)
    lambda_sweep: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])

    def resolve_sensitive(self, n_classes: int) -> List[int]:
        if self.sensitive_classes is not None:
            return sorted(set(self.sensitive_classes))
        count = max(1, math.ceil(n_classes * 27 / 154))
        return list(range(n_classes - count, n_classes))


class TinyWorldConfig(StrictModel):
    n_videos: int = Field(4, ge=1, le=4)
    n_classes: int = Field(3, ge=2, le=3)
    persona_length: int = Field(2, ge=1, le=3)
    alpha: float = Field(0.3, ge=0, lt=1)
    n_draws: int = Field(2, ge=1, le=3)
    trend_boost: float = Field(1.0, ge=0)
    affinity_decay: float = Field(0.8, gt=0, le=1)
    smoothing: float = Field(0.2, gt=0)
    deterministic: bool = False


class AcceptanceConfig(StrictModel):
    """Thresholds of the directional checks run over a finished experiment's tables."""

    ordering_env: Literal["surrogate", "world"] = "surrogate"
    ordering_ratio: float = Field(1.3, gt=0, description="P^Norm(policy) / P^Norm(rand) lower bound")
    p_value: float = Field(0.05, gt=0, lt=1)
    min_personas: int = Field(100, ge=2)
    utility_spread: float = Field(0.05, ge=0, description="max spread of denoiser U_Loss across obfuscators")
    tradeoff_alpha: float = Field(0.5, gt=0, lt=1)
    tradeoff_ratio: float = Field(0.6, gt=0, description="U_Loss(denoiser) / U_Loss(none) upper bound")
    d_sens_reduction: float = Field(0.5, ge=0, le=1)


# ──────────────────────────────────────────────────────────────
# Experiment
# ──────────────────────────────────────────────────────────────
class ExperimentConfig(StrictModel):
    config_format: Literal[1] = CONFIG_FORMAT
    seed: int = Field(0, ge=0)
    output_dir: str = "runs"
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    world: WorldConfig = Field(default_factory=WorldConfig)
    sock_puppet: SockPuppetConfig = Field(default_factory=SockPuppetConfig)
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    personas: PersonaCounts = Field(default_factory=PersonaCounts)
    surrogate: TrainingConfig = Field(default_factory=TrainingConfig)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    a2c: A2CConfig = Field(default_factory=A2CConfig)
    baselines: BaselineConfig = Field(default_factory=BaselineConfig)
    denoiser: TrainingConfig = Field(default_factory=TrainingConfig)
    adversary: AdversaryConfig = Field(default_factory=AdversaryConfig)
    personalization: PersonalizationConfig = Field(default_factory=PersonalizationConfig)
    tiny_world: TinyWorldConfig = Field(default_factory=TinyWorldConfig)
    acceptance: AcceptanceConfig = Field(default_factory=AcceptanceConfig)
    alphas: List[float] = Field(default_factory=lambda: [0.2, 0.3, 0.5, 0.7])
    norm_refresh_samples: int = Field(10, ge=2)
    norm_pairs: int = Field(500, ge=1)
    include_noisy_in_obfuscation_set: bool = True
    eval_envs: List[Literal["surrogate", "world"]] = Field(default_factory=lambda: ["surrogate", "world"])

    @field_validator("alphas")
    @classmethod
    def _alphas(cls, v):
        if not v:
            raise ValueError("alphas must not be empty")
        if any(a < 0 or a >= 1 for a in v):
            raise ValueError("every alpha must satisfy 0 <= alpha < 1")
        return sorted(set(v))

    @model_validator(mode="after")
    def _cross(self):
        k = self.corpus.n_classes
        sensitive = self.personalization.resolve_sensitive(k)
        if any(c < 0 or c >= k for c in sensitive):
            raise ValueError("sensitive_classes must be class ids in [0, K)")
        if len(sensitive) >= k:
            raise ValueError("sensitive_classes must be a proper subset of the classes")
        if self.personas.denoiser > self.personas.train or self.personas.adversary > self.personas.train:
            raise ValueError("denoiser/adversary persona counts cannot exceed the training persona count")
        return self

    # ----------------------------------------------------------
    @classmethod
    def smoke(cls, **overrides) -> "ExperimentConfig":
        """Small preset (K=8, 200 personas) that runs end-to-end in minutes."""
        base = {
            "corpus": {"n_classes": 8, "n_videos": 600, "vocab_size": 800, "mean_tokens": 30, "bank_min": 20},
            "world": {"refreshes": 10},
            "sock_puppet": {"depth": 10, "total": 20},
            "calibration": {"n_personas": 40, "n_refresh_samples": 4, "max_iter": 12},
            "personas": {"train": 200, "eval": 60, "denoiser": 120, "adversary": 80, "min_len": 20},
            "surrogate": {"hidden_dim": 32, "epochs": 5},
            "policy": {"conv_channels": 16, "hidden_dim": 16, "window": 20},
            "a2c": {"epochs": 2},
            "baselines": {"bias_epochs": 2, "pbooster_candidates": 16},
            "denoiser": {"hidden_dim": 16, "epochs": 5},
            "adversary": {"hidden_dim": 16, "epochs": 3},
            "personalization": {"lambda_sweep": []},
            "alphas": [0.2, 0.5],
            "norm_refresh_samples": 4,
            "norm_pairs": 100,
        }
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(base.get(key), dict):
                base[key] = {**base[key], **value}
            else:
                base[key] = value
        return cls.model_validate(base)

    def config_hash(self) -> str:
        """Content hash of the canonical JSON dump; stamped on every artifact row."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON config file; any problem becomes a ConfigError."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    version = raw.get("config_format", CONFIG_FORMAT)
    if version != CONFIG_FORMAT:
        raise ConfigError(f"{path}: unsupported config_format {version!r}")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
