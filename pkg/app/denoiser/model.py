"""
Denoiser: estimate the clean recommendation distribution C^u from the
user's own history V^u, the obfuscated history V^o and the observed C^o.

    f1 = LSTM_u(V^u)[last]      f2 = LSTM_o(V^o)[last]      f3 = tanh(W C^o + b)
    C^u_hat = softmax(Dense([f1, f2, f3]))
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from app.diffnet.checkpoint import load_checkpoint, save_checkpoint
from app.diffnet.core import Module
from app.diffnet.layers import LSTM, Dense, Tanh, pad_sequences
from app.diffnet.losses import softmax
from app.errors import DegenerateInputError
from app.surrogate.model import SurrogateNetwork, surrogate_predict

MODEL_NAME = "denoiser"


class DenoiserNetwork(Module):
    def __init__(self, emb_dim: int, n_classes: int, hidden_dim: int = 128, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.emb_dim = emb_dim
        self.n_classes = n_classes
        self.hidden_dim = hidden_dim
        self.lstm_u = LSTM(emb_dim, hidden_dim, rng)
        self.lstm_o = LSTM(emb_dim, hidden_dim, rng)
        self.fc_c = Dense(n_classes, hidden_dim, rng)
        self.act_c = Tanh()
        self.head = Dense(3 * hidden_dim, n_classes, rng)
        self._steps = None

    @property
    def architecture(self) -> Dict[str, int]:
        return {"emb_dim": self.emb_dim, "n_classes": self.n_classes, "hidden_dim": self.hidden_dim}

    def forward(self, x_u: np.ndarray, mask_u: np.ndarray, x_o: np.ndarray, mask_o: np.ndarray,
                c_o: np.ndarray) -> np.ndarray:
        h_u = self.lstm_u.forward(x_u, mask_u)
        h_o = self.lstm_o.forward(x_o, mask_o)
        f3 = self.act_c.forward(self.fc_c.forward(np.atleast_2d(c_o)))
        self._steps = (h_u.shape[0], h_o.shape[0])
        return self.head.forward(np.concatenate([h_u[-1], h_o[-1], f3], axis=1))

    def backward(self, grad_logits: np.ndarray) -> None:
        n = self.hidden_dim
        grad = self.head.backward(grad_logits)
        g_u, g_o, g_c = grad[:, :n], grad[:, n:2 * n], grad[:, 2 * n:]
        steps_u, steps_o = self._steps
        self.lstm_u.backward(np.zeros((steps_u,) + g_u.shape), grad_h_last=g_u)
        self.lstm_o.backward(np.zeros((steps_o,) + g_o.shape), grad_h_last=g_o)
        self.fc_c.backward(self.act_c.backward(g_c))

    def logits(self, user_seqs: Sequence[np.ndarray], obf_seqs: Sequence[np.ndarray], c_o: np.ndarray) -> np.ndarray:
        x_u, mask_u = pad_sequences(list(user_seqs), self.emb_dim)
        x_o, mask_o = pad_sequences(list(obf_seqs), self.emb_dim)
        return self.forward(x_u, mask_u, x_o, mask_o, c_o)

    def predict(self, user_seqs: Sequence[np.ndarray], obf_seqs: Sequence[np.ndarray], c_o: np.ndarray) -> np.ndarray:
        return softmax(self.logits(user_seqs, obf_seqs, c_o))

    def save(self, path: str | Path, meta: Optional[dict] = None) -> Path:
        return save_checkpoint(path, self, MODEL_NAME, self.architecture, meta)

    @classmethod
    def load(cls, path: str | Path) -> "DenoiserNetwork":
        header, state = load_checkpoint(path, MODEL_NAME)
        model = cls(**header["architecture"])
        model.load_state_dict(state)
        return model


def is_subsequence(v_u: np.ndarray, v_o: np.ndarray) -> bool:
    """True when the rows of `v_u` occur in `v_o` in the same order, gaps allowed."""
    if v_u.shape[1] != v_o.shape[1]:
        return False
    i = 0
    for row in v_o:
        if i < len(v_u) and np.array_equal(row, v_u[i]):
            i += 1
    return i == len(v_u)


def denoise(model: DenoiserNetwork, v_u: np.ndarray, v_o: np.ndarray, c_o: np.ndarray) -> np.ndarray:
    """C^u_hat for one (V^u, V^o, C^o) triple of embedding matrices and a distribution."""
    v_u = np.asarray(v_u, dtype=np.float64)
    v_o = np.asarray(v_o, dtype=np.float64)
    if v_u.ndim != 2 or v_u.shape[0] == 0 or v_o.ndim != 2 or v_o.shape[0] == 0:
        raise DegenerateInputError("denoise needs non-empty user and obfuscated histories")
    if not is_subsequence(v_u, v_o):
        raise DegenerateInputError("V^u must appear in order within V^o")
    c_o = np.asarray(c_o, dtype=np.float64)
    if c_o.shape != (model.n_classes,):
        raise DegenerateInputError(f"C^o must have {model.n_classes} entries")
    return model.predict([v_u], [v_o], c_o[None, :])[0]


def baseline_surro_den(surrogate: SurrogateNetwork, v_u: np.ndarray) -> np.ndarray:
    """Surrogate prediction from the clean history alone; V^o and C^o are ignored."""
    return surrogate_predict(surrogate, v_u)
