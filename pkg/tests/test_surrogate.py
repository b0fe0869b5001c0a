import numpy as np
import pytest

from app.errors import DegenerateInputError
from app.metrics import kl_divergence
from app.obfuscator import SurrogateEnvironment, make_environment
from app.schemas import TrainingConfig
from app.surrogate import SurrogateNetwork, predict_batch, surrogate_predict, train_surrogate

CONFIG = TrainingConfig(hidden_dim=4, epochs=3, batch_size=4, lr=0.05)


@pytest.fixture(scope="module")
def training_data(world, personas):
    ids = [p.video_ids for p in personas]
    targets = np.stack([world.recommend_distribution(p, seed=1) for p in ids])
    return ids, targets


@pytest.fixture(scope="module")
def trained(training_data, embeddings):
    ids, targets = training_data
    return train_surrogate(ids, targets, embeddings, CONFIG, seed=0)


def test_training_reports_held_out_loss_and_baselines(trained, training_data):
    assert len(trained.curve) == CONFIG.epochs
    assert all({"epoch", "train_loss", "test_loss"} <= set(row) for row in trained.curve)
    assert trained.test_loss == trained.curve[-1]["test_loss"]
    assert trained.test_loss >= 0
    assert trained.uniform_baseline >= 0 and trained.mean_baseline >= 0


def test_training_is_reproducible(trained, training_data, embeddings):
    ids, targets = training_data
    again = train_surrogate(ids, targets, embeddings, CONFIG, seed=0)
    for name, values in trained.model.state_dict().items():
        np.testing.assert_array_equal(values, again.model.state_dict()[name])


def test_predictions_are_distributions(trained, training_data, embeddings):
    ids, _ = training_data
    preds = predict_batch(trained.model, ids, embeddings, batch_size=5)
    assert preds.shape == (len(ids), trained.model.n_classes)
    np.testing.assert_allclose(preds.sum(axis=1), 1.0, atol=1e-12)
    single = surrogate_predict(trained.model, embeddings[list(ids[0])])
    np.testing.assert_allclose(single, preds[0], atol=1e-12)


def test_batched_prediction_matches_unpadded(trained, embeddings):
    short, long = (1, 2), (3, 4, 5, 6)
    together = predict_batch(trained.model, [short, long], embeddings)
    alone = predict_batch(trained.model, [short], embeddings)
    np.testing.assert_allclose(together[0], alone[0], atol=1e-10)


def test_untrained_reference_model_is_uniform(embeddings):
    model = SurrogateNetwork(embeddings.shape[1], 4, hidden_dim=3)
    model.fill_(0.0)
    np.testing.assert_allclose(surrogate_predict(model, embeddings[:3]), 0.25)


def test_surrogate_environment(trained, embeddings, training_data):
    env = make_environment("surrogate", surrogate=trained.model, embeddings=embeddings)
    assert isinstance(env, SurrogateEnvironment)
    ids, _ = training_data
    dists = env.distributions(ids[:3], seed=123)
    np.testing.assert_array_equal(dists, env.distributions(ids[:3], seed=0))
    with pytest.raises(DegenerateInputError):
        env.distributions([()])


def test_training_preconditions(embeddings, training_data):
    ids, targets = training_data
    with pytest.raises(DegenerateInputError):
        train_surrogate(ids[:5], targets[:5], embeddings, CONFIG)
    with pytest.raises(DegenerateInputError):
        train_surrogate(ids, targets[:-1], embeddings, CONFIG)
    with pytest.raises(DegenerateInputError):
        surrogate_predict(SurrogateNetwork(embeddings.shape[1], 4, 2), np.zeros((0, embeddings.shape[1])))


def test_prediction_depends_on_watch_order(trained, training_data, embeddings):
    ids, _ = training_data
    rng = np.random.default_rng(6)
    for persona in ids[:5]:
        history = embeddings[list(persona)]
        base = surrogate_predict(trained.model, history)
        order = rng.permutation(len(persona))
        while np.array_equal(order, np.arange(len(persona))):
            order = rng.permutation(len(persona))
        assert kl_divergence(base, surrogate_predict(trained.model, history[order])) > 1e-12
        assert kl_divergence(base, surrogate_predict(trained.model, history[::-1])) > 1e-12
