"""
Surrogate of the recommendation oracle: LSTM over video embeddings, dense
head, softmax over the K classes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from app.diffnet.checkpoint import load_checkpoint, save_checkpoint
from app.diffnet.core import Module
from app.diffnet.layers import LSTM, Dense, pad_sequences
from app.diffnet.losses import softmax
from app.errors import DegenerateInputError

MODEL_NAME = "surrogate"


class SurrogateNetwork(Module):
    def __init__(self, emb_dim: int, n_classes: int, hidden_dim: int = 128, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.emb_dim = emb_dim
        self.n_classes = n_classes
        self.hidden_dim = hidden_dim
        self.lstm = LSTM(emb_dim, hidden_dim, rng)
        self.head = Dense(hidden_dim, n_classes, rng)

    @property
    def architecture(self) -> Dict[str, int]:
        return {"emb_dim": self.emb_dim, "n_classes": self.n_classes, "hidden_dim": self.hidden_dim}

    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        """x (T, B, D) -> logits (B, K) from the last hidden state."""
        hidden = self.lstm.forward(x, mask)
        self._steps = hidden.shape[0]
        return self.head.forward(hidden[-1])

    def backward(self, grad_logits: np.ndarray) -> None:
        grad_h = self.head.backward(grad_logits)
        grad_seq = np.zeros((self._steps,) + grad_h.shape)
        self.lstm.backward(grad_seq, grad_h_last=grad_h)

    def predict(self, sequences: Sequence[np.ndarray]) -> np.ndarray:
        """Class distributions (B, K) for a list of (n_i, D) embedding sequences."""
        x, mask = pad_sequences(list(sequences), self.emb_dim)
        return softmax(self.forward(x, mask))

    def save(self, path: str | Path, meta: Optional[dict] = None) -> Path:
        return save_checkpoint(path, self, MODEL_NAME, self.architecture, meta)

    @classmethod
    def load(cls, path: str | Path) -> "SurrogateNetwork":
        header, state = load_checkpoint(path, MODEL_NAME)
        model = cls(**header["architecture"])
        model.load_state_dict(state)
        return model


def surrogate_predict(model: SurrogateNetwork, persona_embeddings: np.ndarray) -> np.ndarray:
    """Recommended class distribution for one persona's (n, D) embedding matrix."""
    persona_embeddings = np.asarray(persona_embeddings, dtype=np.float64)
    if persona_embeddings.ndim != 2 or persona_embeddings.shape[0] < 1:
        raise DegenerateInputError("surrogate_predict needs a persona with at least one video")
    return model.predict([persona_embeddings])[0]
