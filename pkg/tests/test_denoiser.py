import numpy as np
import pytest

from app.corpus.bank import VideoBank
from app.denoiser import (
    DenoiserDataset,
    DenoiserNetwork,
    baseline_surro_den,
    denoise,
    predict_dataset,
    repopulate,
    train_denoiser,
)
from app.errors import DegenerateInputError
from app.metrics import privacy, utility_loss
from app.schemas import TrainingConfig
from app.surrogate import SurrogateNetwork, surrogate_predict
from app.world import Persona, Source

CONFIG = TrainingConfig(hidden_dim=3, epochs=2, batch_size=4, lr=0.05)


def _obfuscate(persona, video_id):
    ids = (persona.video_ids[0], video_id) + persona.video_ids[1:]
    sources = (Source.USER, Source.OBFUSCATION) + (Source.USER,) * (len(persona) - 1)
    return Persona(ids, sources, persona.user_id)


@pytest.fixture(scope="module")
def dataset(world, personas):
    obfuscated = [_obfuscate(p, (7 * i) % 80) for i, p in enumerate(personas[:12])]
    c_o = np.stack([world.recommend_distribution(p, seed=0) for p in obfuscated])
    c_u = np.stack([world.recommend_distribution(p.user_videos(), seed=1) for p in obfuscated])
    return DenoiserDataset.from_personas(obfuscated, c_o, c_u)


def test_dataset_keeps_user_subsequence(dataset, personas):
    assert len(dataset) == 12
    assert [tuple(u) for u in dataset.user_personas] == [p.video_ids for p in personas[:12]]
    assert all(len(o) == len(u) + 1 for o, u in zip(dataset.obfuscated_personas, dataset.user_personas))


def test_dataset_rejects_ragged_columns(dataset):
    with pytest.raises(DegenerateInputError):
        DenoiserDataset(dataset.user_personas, dataset.obfuscated_personas[:-1], dataset.c_o, dataset.c_u)


def test_training_reports_held_out_metrics(dataset, embeddings):
    result = train_denoiser(dataset, embeddings, CONFIG, seed=0, d_min=0.0)
    assert len(result.curve) == CONFIG.epochs
    preds = predict_dataset(result.model, dataset, embeddings, result.test_idx)
    assert result.u_loss == pytest.approx(utility_loss(preds, dataset.c_u[result.test_idx]))
    assert result.privacy == pytest.approx(privacy(dataset.c_o[result.test_idx], dataset.c_u[result.test_idx]))
    assert result.u_gain_norm == pytest.approx((result.privacy - result.u_loss) / result.privacy)


def test_training_without_d_min_leaves_gain_undefined(dataset, embeddings):
    assert train_denoiser(dataset, embeddings, CONFIG, seed=1).u_gain_norm is None


@pytest.mark.slow
def test_denoiser_learns_the_identity_when_obfuscation_is_harmless(dataset, embeddings):
    corners = np.full((4, 4), 0.1) + 0.6 * np.eye(4)
    c = corners[np.arange(36) % 4]
    identity = DenoiserDataset(list(dataset.user_personas) * 3, list(dataset.obfuscated_personas) * 3, c, c.copy())
    config = TrainingConfig(hidden_dim=8, epochs=200, batch_size=4, lr=0.05)
    result = train_denoiser(identity, embeddings, config, seed=0)
    assert utility_loss(predict_dataset(result.model, identity, embeddings), identity.c_u) < 0.01


def test_training_needs_enough_pairs(dataset, embeddings):
    small = DenoiserDataset(dataset.user_personas[:4], dataset.obfuscated_personas[:4], dataset.c_o[:4],
                            dataset.c_u[:4])
    with pytest.raises(DegenerateInputError):
        train_denoiser(small, embeddings, CONFIG)


def test_denoise_returns_a_distribution(embeddings):
    model = DenoiserNetwork(embeddings.shape[1], 4, hidden_dim=3, seed=2)
    out = denoise(model, embeddings[[1, 2]], embeddings[[1, 9, 2]], np.full(4, 0.25))
    assert out.shape == (4,)
    assert out.sum() == pytest.approx(1.0)


@pytest.mark.parametrize(
    "v_u,v_o,c_o",
    [
        (np.zeros((0, 28)), np.zeros((2, 28)), np.full(4, 0.25)),
        (np.zeros((2, 28)), np.zeros((0, 28)), np.full(4, 0.25)),
        (np.zeros((2, 28)), np.zeros((2, 28)), np.full(3, 1 / 3)),
    ],
)
def test_denoise_rejects_bad_inputs(v_u, v_o, c_o):
    model = DenoiserNetwork(28, 4, hidden_dim=2)
    with pytest.raises(DegenerateInputError):
        denoise(model, v_u, v_o, c_o)


@pytest.mark.parametrize("user,obfuscated", [([1, 2], [2, 9, 1]), ([1, 2], [1, 9]), ([1, 2, 3], [1, 2])])
def test_denoise_rejects_user_history_not_in_obfuscated_order(embeddings, user, obfuscated):
    model = DenoiserNetwork(embeddings.shape[1], 4, hidden_dim=2)
    with pytest.raises(DegenerateInputError):
        denoise(model, embeddings[user], embeddings[obfuscated], np.full(4, 0.25))


def test_surrogate_baseline_ignores_obfuscated_view(embeddings):
    surrogate = SurrogateNetwork(embeddings.shape[1], 4, hidden_dim=3, seed=5)
    v_u = embeddings[[3, 4, 5]]
    np.testing.assert_array_equal(baseline_surro_den(surrogate, v_u), surrogate_predict(surrogate, v_u))


def test_denoiser_checkpoint_round_trip(tmp_path, embeddings):
    model = DenoiserNetwork(embeddings.shape[1], 4, hidden_dim=3, seed=4)
    loaded = DenoiserNetwork.load(model.save(tmp_path / "denoiser.npz"))
    args = (embeddings[[1, 2]], embeddings[[1, 3, 2]], np.array([0.1, 0.2, 0.3, 0.4]))
    np.testing.assert_array_equal(denoise(model, *args), denoise(loaded, *args))


# ──────────────────────────────────────────────────────────────
# Repopulation
# ──────────────────────────────────────────────────────────────
@pytest.fixture
def bank():
    return VideoBank(per_class={0: (1, 2, 3), 1: (4, 5), 2: (6,)})


def test_repopulate_follows_target(bank):
    result = repopulate(bank, np.array([0.5, 0.5, 0.0]), 4)
    assert result.video_ids == [1, 2, 4, 5]
    assert result.allocation.tolist() == [2, 2, 0]
    assert result.spills == []
    assert result.tv_gap == pytest.approx(0.0)


def test_repopulate_spills_to_next_class_by_mass(bank):
    result = repopulate(bank, np.array([0.0, 0.0, 1.0]), 3)
    assert result.video_ids == [6, 1, 2]
    assert result.allocation.tolist() == [2, 0, 1]
    assert result.spills == [(2, 0, 2)]
    assert result.tv_gap == pytest.approx(2 / 3)


def test_repopulate_never_repeats_shared_videos():
    shared = VideoBank(per_class={0: (1, 2), 1: (1, 3)})
    result = repopulate(shared, np.array([0.5, 0.5]), 2)
    assert result.video_ids == [1, 3]


def test_repopulate_normalizes_target(bank):
    assert repopulate(bank, np.array([2.0, 2.0, 0.0]), 4).video_ids == [1, 2, 4, 5]


def test_repopulate_raises_when_bank_is_exhausted(bank):
    with pytest.raises(DegenerateInputError):
        repopulate(bank, np.array([0.4, 0.3, 0.3]), 7)


@pytest.mark.parametrize("target,count", [([0.5, 0.5, 0.0], 0), ([], 2), ([0.0, 0.0, 0.0], 2), ([-0.5, 1.5, 0.0], 2)])
def test_repopulate_rejects_bad_arguments(bank, target, count):
    with pytest.raises(DegenerateInputError):
        repopulate(bank, np.array(target), count)


def test_repopulate_reports_class_mix_of_served_videos(bank):
    membership = np.zeros((7, 3))
    membership[[1, 2, 3], 0] = 1.0
    membership[[4, 5], 1] = 1.0
    membership[[1, 6], 2] = 1.0
    result = repopulate(bank, np.array([0.5, 0.5, 0.0]), 4, membership=membership)
    assert result.video_ids == [1, 2, 4, 5]
    np.testing.assert_allclose(result.allocation_distribution, [0.5, 0.5, 0.0])
    np.testing.assert_allclose(result.distribution, [0.4, 0.4, 0.2])
    assert result.tv_gap == pytest.approx(0.2)


def test_repopulate_rejects_membership_of_wrong_width(bank):
    with pytest.raises(DegenerateInputError):
        repopulate(bank, np.array([0.5, 0.5, 0.0]), 4, membership=np.ones((7, 2)))
