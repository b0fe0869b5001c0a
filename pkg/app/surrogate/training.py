from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from app.diffnet.layers import pad_sequences
from app.diffnet.losses import kl_loss, softmax
from app.diffnet.optim import SGD
from app.diffnet.training import split_indices, take, train_epochs
from app.errors import DegenerateInputError
from app.metrics.divergence import kl_rows
from app.schemas import TrainingConfig
from app.surrogate.model import SurrogateNetwork

logger = logging.getLogger(__name__)

MIN_DATASET = 10


@dataclass
class SurrogateTrainingResult:
    model: SurrogateNetwork
    test_loss: float
    uniform_baseline: float
    mean_baseline: float
    curve: List[Dict[str, float]] = field(default_factory=list)

    @property
    def beats_baselines(self) -> bool:
        return self.test_loss < self.mean_baseline and self.test_loss < self.uniform_baseline


def forward_kl(targets: np.ndarray, preds: np.ndarray) -> float:
    """Mean KL(target || prediction), the quantity the training loss minimizes."""
    return float(np.mean(kl_rows(targets, preds)))


def train_surrogate(
    personas: Sequence[Sequence[int]],
    targets: np.ndarray,
    embeddings: np.ndarray,
    config: TrainingConfig,
    seed: int = 0,
) -> SurrogateTrainingResult:
    """
    Fit the surrogate on (persona, C^u) pairs with an 80/20 split and return
    the held-out mean KL next to the uniform and constant-mean baselines.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if len(personas) < MIN_DATASET:
        raise DegenerateInputError(f"surrogate dataset has {len(personas)} samples; need >= {MIN_DATASET}")
    if targets.shape[0] != len(personas):
        raise DegenerateInputError("one target distribution per persona is required")

    init_seq, split_seq, order_seq = np.random.SeedSequence(seed).spawn(3)
    n_classes = targets.shape[1]
    model = SurrogateNetwork(embeddings.shape[1], n_classes, config.hidden_dim,
                             seed=int(init_seq.generate_state(1)[0]))
    train_idx, test_idx = split_indices(len(personas), config.test_fraction, np.random.default_rng(split_seq))
    sequences = [embeddings[np.asarray(p, dtype=np.int64)] for p in personas]

    def step(batch: np.ndarray) -> float:
        x, mask = pad_sequences(take(sequences, batch), model.emb_dim)
        loss, grad = kl_loss(model.forward(x, mask), targets[batch])
        model.backward(grad)
        return loss

    def evaluate() -> float:
        return forward_kl(targets[test_idx], model.predict(take(sequences, test_idx)))

    optimizer = SGD(model, config.lr, config.momentum, config.max_grad_norm)
    curve = train_epochs(optimizer, train_idx, config.batch_size, config.epochs,
                         np.random.default_rng(order_seq), step, evaluate, name="surrogate")

    test_targets = targets[test_idx]
    uniform = np.full_like(test_targets, 1.0 / n_classes)
    mean_dist = np.repeat(targets[train_idx].mean(axis=0, keepdims=True), len(test_idx), axis=0)
    result = SurrogateTrainingResult(
        model=model,
        test_loss=curve[-1]["test_loss"],
        uniform_baseline=forward_kl(test_targets, uniform),
        mean_baseline=forward_kl(test_targets, mean_dist),
        curve=curve,
    )
    logger.info(
        "Surrogate held-out KL %.4f (uniform %.4f, constant-mean %.4f)",
        result.test_loss, result.uniform_baseline, result.mean_baseline,
    )
    if not result.beats_baselines:
        logger.warning("Surrogate does not beat the constant baselines; training may have failed")
    return result


def predict_batch(model: SurrogateNetwork, personas: Sequence[Sequence[int]], embeddings: np.ndarray,
                  batch_size: int = 256) -> np.ndarray:
    out = []
    for start in range(0, len(personas), batch_size):
        chunk = personas[start:start + batch_size]
        out.append(model.predict([embeddings[np.asarray(p, dtype=np.int64)] for p in chunk]))
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.n_classes))


__all__ = ["SurrogateTrainingResult", "train_surrogate", "predict_batch", "forward_kl", "softmax"]
