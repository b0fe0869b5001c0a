import json

import numpy as np
import pytest

from app.corpus import generate_corpus
from app.errors import DataFormatError, DegenerateInputError
from app.schemas import CalibrationConfig, CorpusConfig, WorldConfig
from app.world import (
    Persona,
    RecommendationWorld,
    Source,
    calibrate_noise_temperature,
    export_personas,
    generate_sock_puppets,
    import_personas,
    largest_remainder,
    mean_refresh_divergence,
)


def test_recommend_is_deterministic_per_seed(world, personas):
    ids = personas[0].video_ids
    a = world.recommend(ids, seed=3)
    b = world.recommend(ids, seed=3)
    assert a.video_ids == b.video_ids
    np.testing.assert_array_equal(a.distribution, b.distribution)


def test_recommendation_distribution_is_on_the_simplex(world, personas):
    for p in personas[:4]:
        dist = world.recommend_distribution(p, seed=0)
        assert dist.shape == (world.n_classes,)
        assert dist.sum() == pytest.approx(1.0)
        assert np.all(dist >= 0)


def test_recommendations_never_include_filtered_popular_videos(world, personas):
    popular = set(world.popular_video_ids().tolist())
    assert popular
    for p in personas[:4]:
        assert not popular & set(world.recommend(p, seed=1).video_ids)


def test_world_sees_ids_only(world, personas):
    user = personas[0]
    tagged = Persona(user.video_ids, (Source.OBFUSCATION,) * len(user), "other")
    np.testing.assert_array_equal(world.recommend_distribution(user, 2), world.recommend_distribution(tagged, 2))


def test_zero_temperature_removes_refresh_noise(world, personas):
    quiet = world.with_noise_temperature(0.0)
    ids = personas[0].video_ids
    np.testing.assert_array_equal(quiet.recommend_distribution(ids, 0), quiet.recommend_distribution(ids, 1))


def test_affinity_follows_history(world, corpus):
    k = 2
    members = [int(v) for v in corpus.class_members(k) if corpus[int(v)].class_memberships == [k]]
    affinity = world.affinity(members[:5])
    assert affinity.sum() == pytest.approx(1.0)
    assert int(np.argmax(affinity)) == k


def test_empty_persona_is_rejected(world):
    with pytest.raises(DegenerateInputError):
        world.recommend([])
    with pytest.raises(DegenerateInputError):
        world.up_next([], 3)


def test_up_next_skips_watched_videos(world, personas):
    ids = personas[0].video_ids
    picked = world.up_next(ids, 5, seed=0)
    assert len(picked) == len(set(picked))
    assert not set(picked) & set(ids)


@pytest.mark.parametrize(
    "weights,total,expected",
    [
        ([1.0, 1.0, 1.0], 4, [2, 1, 1]),
        ([0.5, 0.25, 0.25], 4, [2, 1, 1]),
        ([0.0, 1.0], 3, [0, 3]),
        ([0.6, 0.4], 1, [1, 0]),
    ],
)
def test_largest_remainder(weights, total, expected):
    assert largest_remainder(np.array(weights), total)[0].tolist() == expected


def test_largest_remainder_rows_sum_to_total(rng):
    weights = rng.random((20, 5))
    assert np.all(largest_remainder(weights, 7).sum(axis=1) == 7)


# ──────────────────────────────────────────────────────────────
# Personas
# ──────────────────────────────────────────────────────────────
def test_sock_puppets_have_the_configured_length(personas, puppet_config):
    assert len(personas) == 16
    assert all(len(p) == puppet_config.total for p in personas)
    assert all(p.user_count == len(p) for p in personas)
    assert len({p.user_id for p in personas}) == 16


def test_sock_puppets_are_reproducible(puppet_config, world, personas):
    again = generate_sock_puppets(puppet_config, world, count=16, seed=7)
    assert [p.video_ids for p in again] == [p.video_ids for p in personas]


def test_persona_user_subsequence_and_prefix():
    persona = Persona((1, 9, 2, 3), (Source.USER, Source.OBFUSCATION, Source.USER, Source.USER))
    assert persona.user_videos() == (1, 2, 3)
    assert persona.obfuscation_count() == 1
    assert persona.is_obfuscation_of(Persona.from_user_videos([1, 2, 3]))
    assert persona.prefix(2).video_ids == (1, 9)


def test_persona_rejects_misaligned_tags():
    with pytest.raises(ValueError):
        Persona((1, 2), (Source.USER,))


# ──────────────────────────────────────────────────────────────
# Trace files
# ──────────────────────────────────────────────────────────────
def test_trace_round_trip_with_sources(tmp_path):
    personas = [
        Persona((1, 9, 2), (Source.USER, Source.OBFUSCATION, Source.USER), "u1"),
        Persona.from_user_videos([4, 5, 6], "u2"),
    ]
    path = export_personas(tmp_path / "p.jsonl", personas, with_sources=True)
    loaded = import_personas(path, min_len=1)
    assert loaded.personas == personas


def test_export_without_sources_writes_user_subsequence(tmp_path):
    persona = Persona((1, 9, 2), (Source.USER, Source.OBFUSCATION, Source.USER), "u1")
    path = export_personas(tmp_path / "p.jsonl", [persona])
    assert import_personas(path, min_len=1).personas[0].video_ids == (1, 2)


def test_import_drops_short_traces_and_truncates(tmp_path):
    path = tmp_path / "p.jsonl"
    lines = [
        {"persona_format": 1},
        {"user_id": "a", "video_ids": [1, 2, 3, 4, 5]},
        {"user_id": "b", "video_ids": [1]},
    ]
    path.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    result = import_personas(path, min_len=2, max_len=3)
    assert len(result) == 1
    assert result.dropped == 1
    assert result.personas[0].video_ids == (1, 2, 3)


def test_import_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    result = import_personas(path)
    assert len(result) == 0 and result.dropped == 0


@pytest.mark.parametrize(
    "lines,line",
    [
        (['{"persona_format": 2}'], 1),
        (['{"persona_format": 1}', '{"user_id": "a", "video_ids": [1, "x"]}'], 2),
        (['{"persona_format": 1}', '{"user_id": "a", "video_ids": [500]}'], 2),
        (['{"persona_format": 1}', '{"user_id": "a", "video_ids": [1], "sources": []}'], 2),
    ],
)
def test_import_reports_malformed_lines(tmp_path, lines, line):
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataFormatError) as err:
        import_personas(path, min_len=1, n_videos=100)
    assert err.value.line == line


# ──────────────────────────────────────────────────────────────
# Calibration
# ──────────────────────────────────────────────────────────────
def test_refresh_divergence_grows_with_temperature(world, personas):
    ids = [p.video_ids for p in personas[:4]]
    low = mean_refresh_divergence(world.with_noise_temperature(0.05), ids, 3, seed=0)
    high = mean_refresh_divergence(world.with_noise_temperature(4.0), ids, 3, seed=0)
    assert low < high


def test_calibration_hits_a_reachable_target(world, personas):
    ids = [p.video_ids for p in personas[:4]]
    target = mean_refresh_divergence(world.with_noise_temperature(1.0), ids, 3, seed=0)
    config = CalibrationConfig(target_d_min=target, tolerance=0.5 * target, n_refresh_samples=3, max_iter=20,
                               upper_bound=8.0)
    result = calibrate_noise_temperature(world, ids, config, seed=0)
    assert result.converged
    assert abs(result.d_min - target) <= config.tolerance


def test_calibration_reports_unreachable_target(world, personas):
    ids = [p.video_ids for p in personas[:3]]
    config = CalibrationConfig(target_d_min=1e6, n_refresh_samples=2, upper_bound=0.5)
    result = calibrate_noise_temperature(world, ids, config, seed=0)
    assert not result.converged
    assert result.noise_temperature == 0.5


def test_watching_more_of_a_class_never_lowers_its_share():
    corpus = generate_corpus(CorpusConfig(n_classes=4, n_videos=120, vocab_size=200, mean_tokens=8,
                                          extra_membership_prob=0.0), seed=2)
    world = RecommendationWorld(corpus, WorldConfig(noise_temperature=0.0, refreshes=3, recs_per_refresh=12))
    rng = np.random.default_rng(4)
    for _ in range(10):
        history = tuple(int(v) for v in rng.integers(corpus.n_videos, size=15))
        before = world.recommend_distribution(history)
        for k in range(corpus.n_classes):
            members = corpus.class_members(k)
            extra = tuple(int(v) for v in np.resize(members, 10))
            after = world.recommend_distribution(history + extra)
            assert after[k] >= before[k] - 1e-12
