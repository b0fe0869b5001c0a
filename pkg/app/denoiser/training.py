from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.denoiser.model import DenoiserNetwork
from app.diffnet.losses import kl_loss
from app.diffnet.optim import SGD
from app.diffnet.training import split_indices, take, train_epochs
from app.errors import DegenerateInputError
from app.metrics.divergence import privacy, utility_gain_norm, utility_loss
from app.schemas import TrainingConfig
from app.world.personas import Persona

logger = logging.getLogger(__name__)

MIN_DATASET = 10


@dataclass
class DenoiserDataset:
    """Aligned (V^u, V^o, C^o) -> C^u training pairs; ids, not embeddings."""

    user_personas: List[Sequence[int]]
    obfuscated_personas: List[Sequence[int]]
    c_o: np.ndarray
    c_u: np.ndarray

    def __post_init__(self):
        n = len(self.user_personas)
        if len(self.obfuscated_personas) != n or self.c_o.shape[0] != n or self.c_u.shape[0] != n:
            raise DegenerateInputError("denoiser dataset columns differ in length")

    def __len__(self) -> int:
        return len(self.user_personas)

    @classmethod
    def from_personas(cls, obfuscated: Sequence[Persona], c_o: np.ndarray, c_u: np.ndarray) -> "DenoiserDataset":
        return cls(
            user_personas=[p.user_videos() for p in obfuscated],
            obfuscated_personas=[p.video_ids for p in obfuscated],
            c_o=np.asarray(c_o, dtype=np.float64),
            c_u=np.asarray(c_u, dtype=np.float64),
        )


@dataclass
class DenoiserTrainingResult:
    model: DenoiserNetwork
    test_idx: np.ndarray
    u_loss: float
    privacy: float
    u_gain_norm: Optional[float]
    curve: List[Dict[str, float]] = field(default_factory=list)


def predict_dataset(model: DenoiserNetwork, data: DenoiserDataset, embeddings: np.ndarray,
                    idx: Optional[np.ndarray] = None, batch_size: int = 256) -> np.ndarray:
    idx = np.arange(len(data)) if idx is None else np.asarray(idx)
    out = []
    for start in range(0, idx.size, batch_size):
        chunk = idx[start:start + batch_size]
        user = [embeddings[np.asarray(data.user_personas[i], dtype=np.int64)] for i in chunk]
        obf = [embeddings[np.asarray(data.obfuscated_personas[i], dtype=np.int64)] for i in chunk]
        out.append(model.predict(user, obf, data.c_o[chunk]))
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.n_classes))


def train_denoiser(
    data: DenoiserDataset,
    embeddings: np.ndarray,
    config: TrainingConfig,
    seed: int = 0,
    d_min: Optional[float] = None,
) -> DenoiserTrainingResult:
    """
    Fit on an 80/20 split with the forward-KL loss. Reports held-out U_Loss,
    the privacy P of the same pairs and, given d_min, U_Gain^Norm.
    """
    if len(data) < MIN_DATASET:
        raise DegenerateInputError(f"denoiser dataset has {len(data)} samples; need >= {MIN_DATASET}")
    init_seq, split_seq, order_seq = np.random.SeedSequence(seed).spawn(3)
    model = DenoiserNetwork(embeddings.shape[1], data.c_u.shape[1], config.hidden_dim,
                            seed=int(init_seq.generate_state(1)[0]))
    train_idx, test_idx = split_indices(len(data), config.test_fraction, np.random.default_rng(split_seq))
    user_seqs = [embeddings[np.asarray(p, dtype=np.int64)] for p in data.user_personas]
    obf_seqs = [embeddings[np.asarray(p, dtype=np.int64)] for p in data.obfuscated_personas]

    def step(batch: np.ndarray) -> float:
        logits = model.logits(take(user_seqs, batch), take(obf_seqs, batch), data.c_o[batch])
        loss, grad = kl_loss(logits, data.c_u[batch])
        model.backward(grad)
        return loss

    def evaluate() -> float:
        return utility_loss(predict_dataset(model, data, embeddings, test_idx), data.c_u[test_idx])

    optimizer = SGD(model, config.lr, config.momentum, config.max_grad_norm)
    curve = train_epochs(optimizer, train_idx, config.batch_size, config.epochs,
                         np.random.default_rng(order_seq), step, evaluate, name="denoiser")

    u_loss = curve[-1]["test_loss"]
    p = privacy(data.c_o[test_idx], data.c_u[test_idx])
    gain = None
    if d_min is not None and p != d_min:
        gain = utility_gain_norm(p, u_loss, d_min)
    logger.info("Denoiser held-out U_Loss %.4f, P %.4f, U_Gain^Norm %s",
                u_loss, p, "n/a" if gain is None else f"{gain:.2%}")
    return DenoiserTrainingResult(model=model, test_idx=test_idx, u_loss=u_loss, privacy=p,
                                  u_gain_norm=gain, curve=curve)
