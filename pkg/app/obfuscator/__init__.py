from app.obfuscator.a2c import A2CResult, a2c_update, train_a2c
from app.obfuscator.baselines import (
    BiasObfuscator,
    Obfuscator,
    PBoosterObfuscator,
    PolicyObfuscator,
    RandObfuscator,
    baseline_bias,
    baseline_pbooster,
    baseline_rand,
    build_reward_profile,
    make_obfuscator,
)
from app.obfuscator.environments import Environment, SurrogateEnvironment, WorldEnvironment, make_environment
from app.obfuscator.mdp import (
    EpisodeContext,
    EpisodeResult,
    LiveSchedule,
    MDPState,
    Trajectory,
    expected_obfuscation_count,
    injection_schedule,
    personalized_reward,
    poisson_injection_rate,
    privacy_reward,
    run_episode,
    run_episodes,
    sample_live_schedule,
    schedule_injection,
)
from app.obfuscator.policy import CriticNetwork, PolicyNetwork, action_distribution, policy_distribution

__all__ = [
    "A2CResult",
    "BiasObfuscator",
    "CriticNetwork",
    "Environment",
    "EpisodeContext",
    "EpisodeResult",
    "LiveSchedule",
    "MDPState",
    "Obfuscator",
    "PBoosterObfuscator",
    "PolicyNetwork",
    "PolicyObfuscator",
    "RandObfuscator",
    "SurrogateEnvironment",
    "Trajectory",
    "WorldEnvironment",
    "a2c_update",
    "action_distribution",
    "baseline_bias",
    "baseline_pbooster",
    "baseline_rand",
    "build_reward_profile",
    "expected_obfuscation_count",
    "injection_schedule",
    "make_environment",
    "make_obfuscator",
    "personalized_reward",
    "poisson_injection_rate",
    "policy_distribution",
    "privacy_reward",
    "run_episode",
    "run_episodes",
    "sample_live_schedule",
    "schedule_injection",
    "train_a2c",
]
