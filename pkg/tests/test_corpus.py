import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from app.corpus import build_bank, compute_stats, embed_corpus, generate_corpus, hash_tokens, load_corpus, save_corpus
from app.corpus.bank import STATUS_OK, STATUS_SHORT, STATUS_TOPPED_UP, VideoBank, refresh_bank
from app.corpus.embedding import D_META
from app.errors import ConfigError, DataFormatError, DegenerateInputError
from app.schemas import CorpusConfig


def test_generation_is_a_pure_function_of_config_and_seed(corpus_config, corpus):
    again = generate_corpus(corpus_config, seed=7)
    assert [r.model_dump() for r in again.records] == [r.model_dump() for r in corpus.records]
    other = generate_corpus(corpus_config, seed=8)
    assert [r.tokens for r in other.records] != [r.tokens for r in corpus.records]


def test_every_class_has_a_primary_member(corpus):
    assert corpus.n_videos == 80
    assert np.all(corpus.primary_counts() >= 1)
    for rec in corpus.records:
        assert rec.primary_class in rec.class_memberships
        assert rec.tokens


def test_membership_matrix_matches_records(corpus):
    for rec in corpus.records[:10]:
        assert set(np.flatnonzero(corpus.membership[rec.video_id])) == set(rec.class_memberships)


def test_by_popularity_breaks_ties_by_id(corpus):
    ids = corpus.by_popularity(np.arange(corpus.n_videos))
    pops = corpus.popularity[ids]
    assert np.all(np.diff(pops) <= 0)


def test_custom_priors_shift_the_class_mix():
    config = CorpusConfig(n_classes=2, n_videos=400, vocab_size=64, mean_tokens=5, class_priors=[9.0, 1.0])
    counts = generate_corpus(config, seed=1).primary_counts()
    assert counts[0] > counts[1]


@pytest.mark.slow
def test_primary_classes_follow_the_prior():
    priors = [float(i) for i in range(1, 17)]
    config = CorpusConfig(n_classes=16, n_videos=10_000, vocab_size=200, mean_tokens=5, class_priors=priors)
    corpus = generate_corpus(config, seed=1)
    observed = np.bincount(corpus.primary[16:], minlength=16)
    expected = np.asarray(config.prior()) * observed.sum()
    assert chisquare(observed, expected).pvalue > 0.01


def test_vocab_too_small_for_classes():
    config = CorpusConfig(n_classes=40, n_videos=40, vocab_size=32)
    with pytest.raises(ConfigError):
        generate_corpus(config, seed=0)


def test_config_rejects_mismatched_priors():
    with pytest.raises(ValueError):
        CorpusConfig(n_classes=3, class_priors=[0.5, 0.5])


# ──────────────────────────────────────────────────────────────
# Embeddings
# ──────────────────────────────────────────────────────────────
def test_embedding_layout(embeddings, corpus, corpus_config):
    assert embeddings.shape == (corpus.n_videos, D_META + corpus_config.content_dim)
    content = embeddings[:, D_META:]
    np.testing.assert_allclose(np.linalg.norm(content, axis=1), 1.0, atol=1e-12)
    categories = embeddings[:, :D_META - 2]
    np.testing.assert_array_equal(categories.sum(axis=1), 1.0)


def test_embedding_meta_is_standardized(embeddings):
    pop = embeddings[:, D_META - 2]
    assert pop.mean() == pytest.approx(0.0, abs=1e-9)
    assert pop.std() == pytest.approx(1.0, abs=1e-9)


def test_popularity_feature_is_standardized_raw_popularity(embeddings, corpus, stats):
    assert stats.popularity_mean == pytest.approx(corpus.popularity.mean())
    assert stats.popularity_std == pytest.approx(corpus.popularity.std())
    expected = (corpus.popularity - corpus.popularity.mean()) / corpus.popularity.std()
    np.testing.assert_allclose(embeddings[:, D_META - 2], expected, rtol=1e-12, atol=1e-12)


def test_hash_embedding_keeps_shared_tokens_close():
    rng = np.random.default_rng(3)
    similar, disjoint = [], []
    for _ in range(1000):
        tokens = rng.integers(0, 1_000_000, size=20)
        near = tokens.copy()
        near[:2] = rng.integers(1_000_000, 2_000_000, size=2)
        far = rng.integers(2_000_000, 3_000_000, size=20)
        base = hash_tokens(tokens, 64)
        similar.append(base @ hash_tokens(near, 64))
        disjoint.append(base @ hash_tokens(far, 64))
    similar, disjoint = np.array(similar), np.array(disjoint)
    assert similar.mean() > disjoint.mean()
    assert np.mean(similar > disjoint) >= 0.95


@given(st.lists(st.integers(min_value=0, max_value=10_000), min_size=1, max_size=50), st.integers(2, 64))
def test_hash_tokens_is_deterministic_and_unit_norm(tokens, dim):
    a = hash_tokens(tokens, dim)
    assert np.array_equal(a, hash_tokens(tokens, dim))
    assert np.linalg.norm(a) == pytest.approx(1.0)


def test_hash_tokens_rejects_empty():
    with pytest.raises(DegenerateInputError):
        hash_tokens([], 8)


def test_zero_variance_corpus_is_rejected(corpus):
    from app.corpus.generator import Corpus

    flat = Corpus([r.model_copy(update={"popularity": 1.0}) for r in corpus.records], corpus.classes)
    with pytest.raises(DegenerateInputError):
        compute_stats(flat, 8)


# ──────────────────────────────────────────────────────────────
# Persistence
# ──────────────────────────────────────────────────────────────
def test_save_and_load_corpus(tmp_path, corpus, embeddings, stats):
    save_corpus(tmp_path, corpus, embeddings, stats)
    loaded, loaded_emb, loaded_stats = load_corpus(tmp_path)
    assert loaded.n_classes == corpus.n_classes
    assert [r.model_dump() for r in loaded.records] == [r.model_dump() for r in corpus.records]
    np.testing.assert_array_equal(loaded_emb, embeddings)
    assert loaded_stats == stats
    np.testing.assert_array_equal(embed_corpus(loaded, loaded_stats), embeddings)


def test_load_corpus_reports_bad_line(tmp_path, corpus, embeddings, stats):
    save_corpus(tmp_path, corpus, embeddings, stats)
    path = tmp_path / "corpus.jsonl"
    lines = path.read_text().splitlines()
    lines[3] = json.dumps({"video_id": 2, "tokens": []})
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataFormatError) as err:
        load_corpus(tmp_path)
    assert err.value.line == 4


def test_load_corpus_rejects_unknown_format(tmp_path, corpus, embeddings, stats):
    save_corpus(tmp_path, corpus, embeddings, stats)
    path = tmp_path / "corpus.jsonl"
    lines = path.read_text().splitlines()
    lines[0] = json.dumps({"corpus_format": 99, "n_classes": 4})
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataFormatError):
        load_corpus(tmp_path)


def test_load_corpus_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_corpus(tmp_path / "nowhere")


# ──────────────────────────────────────────────────────────────
# Repopulation bank
# ──────────────────────────────────────────────────────────────
def test_bank_without_log_ranks_all_members_by_popularity(corpus):
    bank = build_bank(corpus, [], bank_min=1)
    for k in range(corpus.n_classes):
        assert list(bank.per_class[k]) == corpus.by_popularity(corpus.class_members(k))
        assert bank.status[k] == STATUS_OK


def test_bank_tops_up_under_covered_classes(corpus):
    members = corpus.class_members(0)
    bank = build_bank(corpus, [[int(members[0])]], bank_min=3)
    assert bank.status[0] == STATUS_TOPPED_UP
    assert bank.depth(0) == 3
    assert int(members[0]) in bank.per_class[0]
    assert bank.noisy_videos == (int(members[0]),)


def test_bank_flags_short_classes(corpus):
    bank = build_bank(corpus, [], bank_min=corpus.n_videos + 1)
    assert bank.short_classes() == list(range(corpus.n_classes))
    assert all(s == STATUS_SHORT for s in bank.status.values())


def test_bank_size_truncates(corpus):
    bank = build_bank(corpus, [], bank_min=1, bank_size=2)
    assert all(bank.depth(k) <= 2 for k in range(corpus.n_classes))


def test_bank_json_round_trip(corpus):
    bank = build_bank(corpus, [[0, 1, 2]], bank_min=2)
    assert VideoBank.from_json(json.loads(json.dumps(bank.to_json()))) == bank


def test_refresh_bank_with_same_log_is_stable(corpus):
    log = [[0, 1, 2, 3, 4, 5]]
    bank = build_bank(corpus, log, bank_min=2)
    refreshed, stability = refresh_bank(bank, corpus, log, bank_min=2)
    assert refreshed.refresh_generation == 1
    assert stability == pytest.approx(1.0)
