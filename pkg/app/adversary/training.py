from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.adversary.detectors import DeobfDetector, StealthDetector
from app.diffnet.layers import pad_sequences
from app.diffnet.losses import bce_with_logits
from app.diffnet.optim import SGD
from app.diffnet.training import split_indices, take, train_epochs
from app.errors import DegenerateInputError
from app.schemas import AdversaryConfig
from app.world.personas import Persona

logger = logging.getLogger(__name__)

MIN_DATASET = 4


@dataclass
class DetectorTrainingResult:
    model: object
    test_idx: np.ndarray
    curve: List[Dict[str, float]] = field(default_factory=list)

    @property
    def test_loss(self) -> float:
        return self.curve[-1]["test_loss"]


def stealth_examples(clean: Sequence[Persona], obfuscated: Sequence[Persona],
                     match_lengths: bool = True) -> Tuple[List[Tuple[int, ...]], np.ndarray]:
    """
    Balanced persona-level examples: label 1 for histories with an injection.
    With `match_lengths` an obfuscated persona is cut to its clean length so
    the detector cannot read the label off the length.
    """
    sequences: List[Tuple[int, ...]] = []
    labels: List[int] = []
    for p in clean:
        sequences.append(p.video_ids)
        labels.append(0)
    for p in obfuscated:
        kept = p.prefix(p.user_count) if match_lengths else p
        sequences.append(kept.video_ids)
        labels.append(int(kept.obfuscation_count() > 0))
    return sequences, np.asarray(labels, dtype=np.float64)


def _fit(model, config: AdversaryConfig, n: int, seed, step, evaluate_factory, name: str) -> DetectorTrainingResult:
    split_seq, order_seq = seed
    train_idx, test_idx = split_indices(n, 0.2, np.random.default_rng(split_seq))
    optimizer = SGD(model, config.lr, config.momentum, config.max_grad_norm)
    curve = train_epochs(optimizer, train_idx, config.batch_size, config.epochs,
                         np.random.default_rng(order_seq), step, evaluate_factory(test_idx), name=name)
    return DetectorTrainingResult(model=model, test_idx=test_idx, curve=curve)


def train_stealth_detector(
    sequences: Sequence[Sequence[int]],
    labels: np.ndarray,
    embeddings: np.ndarray,
    config: AdversaryConfig,
    seed: int = 0,
) -> DetectorTrainingResult:
    labels = np.asarray(labels, dtype=np.float64)
    if len(sequences) < MIN_DATASET or labels.shape[0] != len(sequences):
        raise DegenerateInputError("stealth detector needs at least 4 labelled personas")
    init_seq, split_seq, order_seq = np.random.SeedSequence(seed).spawn(3)
    model = StealthDetector(embeddings.shape[1], config.hidden_dim, seed=int(init_seq.generate_state(1)[0]))
    seqs = [embeddings[np.asarray(s, dtype=np.int64)] for s in sequences]

    def step(batch: np.ndarray) -> float:
        x, mask = pad_sequences(take(seqs, batch), model.emb_dim)
        loss, grad = bce_with_logits(model.forward(x, mask), labels[batch])
        model.backward(grad)
        return loss

    def evaluate_factory(test_idx):
        def evaluate() -> float:
            x, mask = pad_sequences(take(seqs, test_idx), model.emb_dim)
            return bce_with_logits(model.forward(x, mask), labels[test_idx])[0]
        return evaluate

    result = _fit(model, config, len(seqs), (split_seq, order_seq), step, evaluate_factory, "stealth")
    logger.info("Stealth detector trained on %d personas, held-out BCE %.4f", len(seqs), result.test_loss)
    return result


def train_deobf_detector(
    personas: Sequence[Persona],
    embeddings: np.ndarray,
    config: AdversaryConfig,
    seed: int = 0,
) -> DetectorTrainingResult:
    """Per-position tagger trained on obfuscated personas labelled by their source tags."""
    if len(personas) < MIN_DATASET:
        raise DegenerateInputError("deobfuscation detector needs at least 4 personas")
    init_seq, split_seq, order_seq = np.random.SeedSequence(seed).spawn(3)
    model = DeobfDetector(embeddings.shape[1], config.hidden_dim, seed=int(init_seq.generate_state(1)[0]))
    seqs = [embeddings[np.asarray(p.video_ids, dtype=np.int64)] for p in personas]
    tags = [p.obfuscation_mask().astype(np.float64) for p in personas]

    def batch_loss(batch: np.ndarray, backward: bool) -> float:
        x, mask = pad_sequences(take(seqs, batch), model.emb_dim)
        y = np.zeros_like(mask)
        for b, i in enumerate(batch):
            y[:tags[i].size, b] = tags[i]
        loss, grad = bce_with_logits(model.forward(x, mask), y, weights=mask)
        if backward:
            model.backward(grad)
        return loss

    def evaluate_factory(test_idx):
        return lambda: batch_loss(test_idx, backward=False)

    result = _fit(model, config, len(seqs), (split_seq, order_seq),
                  lambda batch: batch_loss(batch, backward=True), evaluate_factory, "deobf")
    logger.info("Deobfuscation detector trained on %d personas, held-out BCE %.4f", len(seqs), result.test_loss)
    return result
