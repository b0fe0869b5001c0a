import numpy as np
import pytest
from scipy.stats import chisquare

from app.errors import DegenerateInputError
from app.metrics.divergence import PersonalizationSpec, kl_divergence, personalized_components
from app.obfuscator import (
    BiasObfuscator,
    CriticNetwork,
    EpisodeContext,
    LiveSchedule,
    PBoosterObfuscator,
    PolicyNetwork,
    RandObfuscator,
    WorldEnvironment,
    action_distribution,
    baseline_bias,
    baseline_rand,
    build_reward_profile,
    expected_obfuscation_count,
    injection_schedule,
    make_environment,
    make_obfuscator,
    personalized_reward,
    poisson_injection_rate,
    policy_distribution,
    privacy_reward,
    run_episode,
    run_episodes,
    sample_live_schedule,
    train_a2c,
)
from app.obfuscator.baselines import bias_probabilities, pbooster_choice
from app.obfuscator.policy import batch_windows, state_window
from app.schemas import A2CConfig, PolicyConfig
from app.world import Source

POLICY = PolicyConfig(conv_channels=3, kernel=2, hidden_dim=3, window=4)


class MembershipEnvironment:
    """Deterministic stand-in: the recommended mix is the history's mean class membership."""

    name = "membership"

    def __init__(self, corpus):
        self.membership = corpus.membership / corpus.membership.sum(axis=1, keepdims=True)
        self.n_classes = corpus.n_classes

    def distributions(self, personas, seed=0):
        return np.stack([self.membership[list(p)].mean(axis=0) for p in personas])


@pytest.fixture
def env(corpus):
    return MembershipEnvironment(corpus)


@pytest.fixture
def obf_ids(corpus):
    return np.arange(0, corpus.n_videos, 4)


@pytest.fixture
def policy(embeddings):
    return PolicyNetwork(embeddings.shape[1], POLICY, seed=1)


def _obfuscators(policy, embeddings, obf_ids):
    profile = np.linspace(-1.0, 1.0, len(obf_ids))
    return [
        RandObfuscator(len(obf_ids)),
        BiasObfuscator(profile),
        PBoosterObfuscator(len(obf_ids), candidates=5),
        make_obfuscator("policy", len(obf_ids), policy=policy, embeddings=embeddings, obfuscation_ids=obf_ids),
    ]


# ──────────────────────────────────────────────────────────────
# Scheduling
# ──────────────────────────────────────────────────────────────
def test_schedule_keeps_every_user_video_and_ends_on_one(rng):
    tags = injection_schedule(10, 0.5, rng)
    assert sum(t is Source.USER for t in tags) == 10
    assert tags[-1] is Source.USER


def test_schedule_without_budget_injects_nothing(rng):
    assert injection_schedule(6, 0.0, rng) == (Source.USER,) * 6


def test_injection_share_matches_alpha(rng):
    alpha, n_user, trials = 0.3, 20, 2000
    counts = [sum(t is Source.OBFUSCATION for t in injection_schedule(n_user, alpha, rng)) for _ in range(trials)]
    assert np.mean(counts) == pytest.approx(expected_obfuscation_count(n_user, alpha), rel=0.05)
    share = np.sum(counts) / (np.sum(counts) + n_user * trials)
    assert share == pytest.approx(alpha, abs=0.02)


@pytest.mark.parametrize("alpha", [-0.1, 1.0, 1.5])
def test_alpha_must_lie_in_unit_interval(rng, alpha):
    with pytest.raises(DegenerateInputError):
        injection_schedule(3, alpha, rng)


def test_poisson_rate_preserves_share():
    rate = poisson_injection_rate(0.2, user_rate=4.0)
    assert rate / (rate + 4.0) == pytest.approx(0.2)


def test_live_schedule_breaks_ties_toward_the_user():
    schedule = LiveSchedule(user_times=(1.0, 2.0), obfuscation_times=(1.0, 1.5))
    assert schedule.order() == (Source.USER, Source.OBFUSCATION, Source.OBFUSCATION, Source.USER)


def test_sample_live_schedule_stays_within_horizon(rng):
    schedule = sample_live_schedule([1.0, 2.0, 5.0], 0.5, rng)
    assert all(0.0 <= t <= 5.0 for t in schedule.obfuscation_times)
    with pytest.raises(DegenerateInputError):
        sample_live_schedule([], 0.5, rng)


# ──────────────────────────────────────────────────────────────
# Episodes
# ──────────────────────────────────────────────────────────────
def test_every_obfuscator_preserves_the_user_subsequence(personas, env, obf_ids, policy, embeddings):
    for obfuscator in _obfuscators(policy, embeddings, obf_ids):
        results = run_episodes(obfuscator, personas[:4], env, 0.4, seed=3, obfuscation_ids=obf_ids)
        for user, result in zip(personas[:4], results):
            assert result.persona.is_obfuscation_of(user)
            injected = np.asarray(result.persona.video_ids)[result.persona.obfuscation_mask()]
            assert set(injected.tolist()) <= set(obf_ids.tolist())
            assert len(result.trajectory) == result.persona.obfuscation_count()


def test_obfuscators_share_schedules_for_the_same_seed(personas, env, obf_ids, policy, embeddings):
    masks = [
        [r.persona.obfuscation_mask().tolist() for r in run_episodes(o, personas[:4], env, 0.4, 11, obf_ids)]
        for o in _obfuscators(policy, embeddings, obf_ids)
    ]
    assert all(m == masks[0] for m in masks)


def test_episode_privacy_trajectory(personas, env, obf_ids):
    result = run_episode(RandObfuscator(len(obf_ids)), personas[0], env, 0.5, seed=5, obfuscation_ids=obf_ids)
    traj = result.trajectory
    assert traj.privacy.shape == (len(traj) + 1,)
    assert traj.privacy[0] == pytest.approx(0.0, abs=1e-12)
    assert traj.rewards.sum() == pytest.approx(traj.privacy[-1])
    c_o = env.distributions([result.persona.video_ids])[0]
    assert result.final_privacy == pytest.approx(kl_divergence(c_o, result.c_u))
    rows = traj.rows()
    assert [r["step"] for r in rows] == list(range(1, len(traj) + 1))


def test_episode_with_zero_alpha_is_the_user_persona(personas, env, obf_ids):
    result = run_episode(RandObfuscator(len(obf_ids)), personas[0], env, 0.0, seed=1, obfuscation_ids=obf_ids)
    assert result.persona.video_ids == personas[0].video_ids
    assert result.final_privacy == 0.0


def test_episode_preconditions(env, obf_ids):
    with pytest.raises(DegenerateInputError):
        run_episode(RandObfuscator(len(obf_ids)), [], env, 0.3, 0, obf_ids)
    with pytest.raises(DegenerateInputError):
        run_episode(RandObfuscator(1), [1, 2], env, 0.3, 0, [])
    with pytest.raises(DegenerateInputError):
        run_episode(RandObfuscator(len(obf_ids)), [1, 2], env, 0.3, 0, obf_ids, schedule=(Source.USER,))


def test_persona_with_applies_only_the_first_injections(env):
    ctx = EpisodeContext(
        user_ids=(1, 2, 3),
        schedule=(Source.OBFUSCATION, Source.USER, Source.OBFUSCATION, Source.USER, Source.USER),
        c_u=np.full(env.n_classes, 1.0 / env.n_classes),
        env=env,
        reward_metric=privacy_reward,
        seed=0,
        obfuscation_ids=np.array([7, 8]),
    )
    assert ctx.persona_with([]) == (1, 2, 3)
    assert ctx.persona_with([7]) == (7, 1, 2, 3)
    assert ctx.persona_with([7, 8]) == (7, 1, 8, 2, 3)


def test_personalized_reward_matches_components(rng):
    spec = PersonalizationSpec.create({0}, n_classes=3, lam=0.5)
    c_o = rng.dirichlet(np.ones(3), size=4)
    c_u = rng.dirichlet(np.ones(3))
    d_nonsens, d_sens = personalized_components(c_o, np.broadcast_to(c_u, c_o.shape), spec)
    np.testing.assert_allclose(personalized_reward(spec)(c_o, c_u), d_nonsens - 0.5 * d_sens)


# ──────────────────────────────────────────────────────────────
# Baselines
# ──────────────────────────────────────────────────────────────
def test_bias_probabilities_keep_only_positive_reward():
    np.testing.assert_allclose(bias_probabilities([-1.0, 1.0, 3.0]), [0.0, 0.25, 0.75])
    np.testing.assert_allclose(bias_probabilities([-1.0, 0.0]), [0.5, 0.5])


def test_baseline_helpers_return_obfuscation_videos(rng):
    ids = [10, 20, 30]
    assert baseline_rand(ids, rng) in ids
    assert baseline_bias(ids, [0.0, 0.0, 1.0], rng) == 30
    with pytest.raises(DegenerateInputError):
        baseline_rand([], rng)


def test_pbooster_ties_resolve_to_the_lowest_video_id():
    pool = np.array([0, 1, 2])
    assert pbooster_choice(pool, np.array([0.5, 0.5, 0.1]), np.array([9, 4, 1])) == 1


def test_pbooster_picks_the_best_single_injection(personas, env, obf_ids):
    greedy = PBoosterObfuscator(len(obf_ids), candidates=len(obf_ids))
    schedule = (Source.OBFUSCATION,) + (Source.USER,) * len(personas[0])
    result = run_episode(greedy, personas[0], env, 0.3, 0, obf_ids, schedule=schedule)
    best = max(
        kl_divergence(env.distributions([(int(v),) + personas[0].video_ids])[0], result.c_u) for v in obf_ids
    )
    assert result.final_privacy == pytest.approx(best)


def test_reward_profile_has_one_entry_per_video(personas, env, obf_ids):
    profile = build_reward_profile(personas[:3], env, obf_ids, alpha=0.5, epochs=2, seed=0)
    assert profile.shape == (len(obf_ids),)
    assert np.all(np.isfinite(profile))


def test_make_obfuscator_validation(obf_ids):
    with pytest.raises(ValueError):
        make_obfuscator("nope", 3)
    with pytest.raises(DegenerateInputError):
        make_obfuscator("policy", 3)
    with pytest.raises(DegenerateInputError):
        make_obfuscator("bias", 3)
    assert make_obfuscator("rand", 3).name == "rand"


def test_make_environment(world):
    assert isinstance(make_environment("world", world=world), WorldEnvironment)
    with pytest.raises(DegenerateInputError):
        make_environment("surrogate")
    with pytest.raises(ValueError):
        make_environment("tv")


# ──────────────────────────────────────────────────────────────
# Policy network
# ──────────────────────────────────────────────────────────────
def test_state_window_is_front_padded(embeddings):
    window = state_window(embeddings, [3, 5], 4)
    assert np.all(window[:2] == 0)
    np.testing.assert_array_equal(window[2:], embeddings[[3, 5]])


def test_batch_windows_masks_short_episodes(embeddings):
    x, mask = batch_windows(embeddings, [((1, 2, 3), [1, 2]), ((4, 5), [1])], window=3)
    assert x.shape == (2, 2, 3, embeddings.shape[1])
    np.testing.assert_array_equal(mask, [[1, 1], [1, 0]])


def test_action_distribution_prefers_aligned_videos():
    obf = np.eye(3)
    probs = action_distribution(np.array([0.0, 5.0, 0.0]), obf)
    assert probs.sum() == pytest.approx(1.0)
    assert int(np.argmax(probs)) == 1


def test_policy_save_and_load(tmp_path, policy, embeddings, obf_ids):
    path = policy.save(tmp_path / "policy.npz")
    loaded = PolicyNetwork.load(path)
    window = state_window(embeddings, [1, 2, 3], POLICY.window)
    np.testing.assert_array_equal(policy.step(window)[0], loaded.step(window)[0])


def test_train_a2c_produces_a_learning_curve(personas, env, obf_ids, embeddings):
    policy = PolicyNetwork(embeddings.shape[1], POLICY, seed=2)
    critic = CriticNetwork(embeddings.shape[1], POLICY, seed=3)
    before = policy.state_dict()
    config = A2CConfig(epochs=2, alpha=0.4, episodes_per_update=4, actor_lr=0.01, critic_lr=0.01)
    result = train_a2c(policy, critic, env, personas[:8], obf_ids, embeddings, config, seed=0)
    assert [row["epoch"] for row in result.curve] == [1, 2]
    assert sum(row["updates"] for row in result.curve) > 0
    assert any(not np.array_equal(before[k], v) for k, v in policy.state_dict().items())
    policy.check_finite()
    critic.check_finite()


def test_train_a2c_is_reproducible(personas, env, obf_ids, embeddings):
    config = A2CConfig(epochs=1, alpha=0.4, episodes_per_update=4)

    def run():
        policy = PolicyNetwork(embeddings.shape[1], POLICY, seed=2)
        critic = CriticNetwork(embeddings.shape[1], POLICY, seed=3)
        train_a2c(policy, critic, env, personas[:4], obf_ids, embeddings, config, seed=5)
        return policy.state_dict()

    a, b = run(), run()
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_train_a2c_needs_personas(env, obf_ids, embeddings, policy):
    critic = CriticNetwork(embeddings.shape[1], POLICY)
    with pytest.raises(DegenerateInputError):
        train_a2c(policy, critic, env, [], obf_ids, embeddings, A2CConfig(epochs=1))


class TargetCountEnvironment:
    """Class 0 mass is the number of plays of `target`; every injection of it is worth one unit."""

    name = "target-count"
    n_classes = 2

    def __init__(self, target):
        self.target = target

    def distributions(self, personas, seed=0):
        return np.array([[float(sum(v == self.target for v in p)), 1.0] for p in personas])


def _count_reward(c_o, c_u):
    return np.atleast_2d(c_o)[:, 0] - c_u[0]


def test_a2c_learns_a_rewarded_video():
    rng = np.random.default_rng(11)
    embeddings = np.vstack([4.0 * np.eye(4), 0.1 * rng.standard_normal((4, 4))])
    obf_ids = np.arange(4)
    personas = [tuple(int(v) for v in rng.integers(4, 8, size=6)) for _ in range(8)]
    policy = PolicyNetwork(4, POLICY, seed=2)
    critic = CriticNetwork(4, POLICY, seed=3)
    config = A2CConfig(epochs=50, alpha=0.5, gamma=0.01, entropy_weight=0.0, actor_lr=0.1, critic_lr=0.1,
                       momentum=0.5, episodes_per_update=2)
    result = train_a2c(policy, critic, TargetCountEnvironment(0), personas, obf_ids, embeddings, config,
                       seed=0, reward_metric=_count_reward)
    assert sum(row["updates"] for row in result.curve) <= 200
    first_step = [policy_distribution(policy, p[:3], embeddings, embeddings[obf_ids])[0][0] for p in personas]
    assert np.mean(first_step) > 0.9
    assert result.curve[-1]["mean_return"] > result.curve[0]["mean_return"]


def test_rand_baseline_is_uniform():
    rng = np.random.default_rng(5)
    draws = [baseline_rand(range(10), rng) for _ in range(10_000)]
    assert chisquare(np.bincount(draws, minlength=10)).pvalue > 0.01
