import numpy as np
import pytest

from app.corpus import compute_stats, embed_corpus, generate_corpus
from app.schemas import CorpusConfig, ExperimentConfig, SockPuppetConfig, WorldConfig
from app.world import RecommendationWorld, generate_sock_puppets

SEED = 7


@pytest.fixture(scope="session")
def corpus_config():
    return CorpusConfig(n_classes=4, n_videos=80, vocab_size=200, mean_tokens=12, content_dim=8, bank_min=5)


@pytest.fixture(scope="session")
def corpus(corpus_config):
    return generate_corpus(corpus_config, seed=SEED)


@pytest.fixture(scope="session")
def stats(corpus, corpus_config):
    return compute_stats(corpus, corpus_config.content_dim)


@pytest.fixture(scope="session")
def embeddings(corpus, stats):
    return embed_corpus(corpus, stats)


@pytest.fixture(scope="session")
def world_config():
    return WorldConfig(refreshes=5, recs_per_refresh=10, noise_temperature=0.5)


@pytest.fixture(scope="session")
def world(corpus, world_config):
    return RecommendationWorld(corpus, world_config)


@pytest.fixture(scope="session")
def puppet_config():
    return SockPuppetConfig(depth=4, total=8, upnext_count=5, seed_decile=0.2)


@pytest.fixture(scope="session")
def personas(puppet_config, world):
    return generate_sock_puppets(puppet_config, world, count=16, seed=SEED)


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def smoke_config(tmp_path):
    """A run small enough for the end-to-end tests."""
    return ExperimentConfig.smoke(
        output_dir=str(tmp_path / "runs"),
        corpus={"n_classes": 4, "n_videos": 120, "vocab_size": 200, "mean_tokens": 12,
                "content_dim": 8, "bank_min": 5},
        world={"refreshes": 4, "recs_per_refresh": 10},
        sock_puppet={"depth": 4, "total": 8, "upnext_count": 5},
        calibration={"n_personas": 4, "n_refresh_samples": 2, "max_iter": 3},
        personas={"train": 24, "eval": 8, "denoiser": 12, "adversary": 12, "min_len": 8},
        surrogate={"hidden_dim": 4, "epochs": 1, "batch_size": 8},
        policy={"conv_channels": 4, "hidden_dim": 4, "window": 4, "kernel": 2},
        a2c={"epochs": 1, "episodes_per_update": 4},
        baselines={"bias_epochs": 1, "pbooster_candidates": 4},
        denoiser={"hidden_dim": 4, "epochs": 1, "batch_size": 8},
        adversary={"hidden_dim": 4, "epochs": 1, "batch_size": 8, "prevalence_curve": [0.25, 0.5]},
        personalization={"sensitive_classes": [3], "lambda_sweep": []},
        tiny_world={"n_videos": 2, "n_classes": 2, "persona_length": 2, "n_draws": 1},
        alphas=[0.3],
        norm_refresh_samples=2,
        norm_pairs=10,
    )


@pytest.fixture
def registry_url(tmp_path):
    from app.database.database import dispose_engines

    yield f"sqlite:///{tmp_path / 'registry.db'}"
    dispose_engines()
