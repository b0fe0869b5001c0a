"""
The platform-side detectors. Both see only embedding sequences; the source
tags of a persona are read by the training code to build labels and never
reach `predict_proba`.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import expit

from app.diffnet.checkpoint import load_checkpoint, save_checkpoint
from app.diffnet.core import Module
from app.diffnet.layers import LSTM, Dense, pad_sequences


class _SequenceDetector(Module):
    model_name = "detector"

    def __init__(self, emb_dim: int, hidden_dim: int = 64, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.emb_dim = emb_dim
        self.hidden_dim = hidden_dim
        self.lstm = LSTM(emb_dim, hidden_dim, rng)
        self.head = Dense(hidden_dim, 1, rng)
        self._steps = None

    @property
    def architecture(self) -> Dict[str, int]:
        return {"emb_dim": self.emb_dim, "hidden_dim": self.hidden_dim}

    def save(self, path: str | Path, meta: Optional[dict] = None) -> Path:
        return save_checkpoint(path, self, self.model_name, self.architecture, meta)

    @classmethod
    def load(cls, path: str | Path):
        header, state = load_checkpoint(path, cls.model_name)
        model = cls(**header["architecture"])
        model.load_state_dict(state)
        return model


class StealthDetector(_SequenceDetector):
    """Persona-level: does this history contain at least one obfuscation video?"""

    model_name = "stealth_detector"

    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        hidden = self.lstm.forward(x, mask)
        self._steps = hidden.shape[0]
        return self.head.forward(hidden[-1])[:, 0]

    def backward(self, grad_logits: np.ndarray) -> None:
        grad_h = self.head.backward(np.asarray(grad_logits)[:, None])
        self.lstm.backward(np.zeros((self._steps,) + grad_h.shape), grad_h_last=grad_h)

    def predict_proba(self, sequences: Sequence[np.ndarray]) -> np.ndarray:
        x, mask = pad_sequences(list(sequences), self.emb_dim)
        return expit(self.forward(x, mask))


class DeobfDetector(_SequenceDetector):
    """Per-position tagger: probability that each entry is an obfuscation video."""

    model_name = "deobf_detector"

    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        hidden = self.lstm.forward(x, mask)
        steps, batch, _ = hidden.shape
        self._steps = (steps, batch)
        return self.head.forward(hidden.reshape(steps * batch, -1)).reshape(steps, batch)

    def backward(self, grad_logits: np.ndarray) -> None:
        steps, batch = self._steps
        grad_h = self.head.backward(np.asarray(grad_logits).reshape(steps * batch, 1))
        self.lstm.backward(grad_h.reshape(steps, batch, -1))

    def predict_proba(self, sequences: Sequence[np.ndarray]) -> List[np.ndarray]:
        """One (n_i,) probability vector per input sequence."""
        sequences = list(sequences)
        x, _ = pad_sequences(sequences, self.emb_dim)
        probs = expit(self.forward(x))
        return [probs[:len(seq), b] for b, seq in enumerate(sequences)]
