"""
Policy and critic networks.

Both share one trunk shape:

    window of the last `window` played embeddings
      -> Conv1D -> mean over positions -> tanh        (phi1, conv_channels)
      -> LSTM across obfuscation steps                  (phi2, hidden_dim)
      -> Dense head

The policy head emits a target embedding e_t; the action distribution over
the obfuscation set is softmax_i <e_t, e_i>. The critic head is a scalar.

Rollouts run the trunk one step at a time (`step`); training replays whole
episodes through `forward_sequence` / `backward_sequence`.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.diffnet.checkpoint import load_checkpoint, save_checkpoint
from app.diffnet.core import DTYPE, Module
from app.diffnet.layers import LSTM, Conv1D, Dense, Tanh, mean_pool, mean_pool_backward
from app.diffnet.losses import softmax
from app.errors import DegenerateInputError
from app.schemas import PolicyConfig

POLICY_MODEL = "policy"
CRITIC_MODEL = "critic"
_NORM_FLOOR = 1e-12


def state_window(embeddings: np.ndarray, played: Sequence[int], window: int) -> np.ndarray:
    """(window, D) matrix of the most recent played embeddings, zero-padded at the front."""
    out = np.zeros((window, embeddings.shape[1]), dtype=DTYPE)
    recent = list(played)[-window:]
    if recent:
        out[window - len(recent):] = embeddings[np.asarray(recent, dtype=np.int64)]
    return out


def episode_windows(embeddings: np.ndarray, persona: Sequence[int], positions: Sequence[int],
                    window: int) -> np.ndarray:
    """(T, window, D) windows seen at each injection position of one episode."""
    return np.stack([state_window(embeddings, persona[:p], window) for p in positions])


def batch_windows(embeddings: np.ndarray, episodes: Sequence[Tuple[Sequence[int], Sequence[int]]],
                  window: int) -> Tuple[np.ndarray, np.ndarray]:
    """Pad (persona, positions) episodes into (T, B, window, D) plus a (T, B) mask."""
    if not episodes:
        raise DegenerateInputError("no episodes to batch")
    steps = max(len(pos) for _, pos in episodes)
    if steps == 0:
        raise DegenerateInputError("every episode in the batch is empty")
    x = np.zeros((steps, len(episodes), window, embeddings.shape[1]), dtype=DTYPE)
    mask = np.zeros((steps, len(episodes)), dtype=DTYPE)
    for b, (persona, positions) in enumerate(episodes):
        if positions:
            x[:len(positions), b] = episode_windows(embeddings, persona, positions, window)
            mask[:len(positions), b] = 1.0
    return x, mask


class _Trunk(Module):
    def __init__(self, emb_dim: int, config: PolicyConfig, out_dim: int, seed: int):
        rng = np.random.default_rng(seed)
        self.emb_dim = emb_dim
        self.config = config
        self.conv = Conv1D(emb_dim, config.conv_channels, config.kernel, rng)
        self.act = Tanh()
        self.lstm = LSTM(config.conv_channels, config.hidden_dim, rng)
        self.head = Dense(config.hidden_dim, out_dim, rng)
        self._shape = None

    @property
    def architecture(self) -> Dict:
        return {"emb_dim": self.emb_dim, **self.config.model_dump()}

    def initial_state(self):
        return self.lstm.initial_state(1)

    def step(self, window: np.ndarray, memory=None) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
        """One obfuscation step: (window, D) -> (head output, new LSTM state)."""
        h, c = memory if memory is not None else self.initial_state()
        phi1 = np.tanh(mean_pool(self.conv.forward(window[None])))
        h, c = self.lstm.step(phi1, h, c)
        return self.head.forward(h)[0], (h, c)

    def forward_sequence(self, windows: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        """(T, B, window, D) -> (T, B, out)."""
        steps, batch, width, dim = windows.shape
        conv = self.conv.forward(windows.reshape(steps * batch, width, dim))
        self._shape = (steps, batch, conv.shape[1])
        phi1 = self.act.forward(mean_pool(conv)).reshape(steps, batch, -1)
        hidden = self.lstm.forward(phi1, mask)
        out = self.head.forward(hidden.reshape(steps * batch, -1))
        return out.reshape(steps, batch, -1)

    def backward_sequence(self, grad_out: np.ndarray) -> None:
        steps, batch, conv_len = self._shape
        grad_h = self.head.backward(grad_out.reshape(steps * batch, -1)).reshape(steps, batch, -1)
        grad_phi = self.lstm.backward(grad_h).reshape(steps * batch, -1)
        grad_pool = self.act.backward(grad_phi)
        self.conv.backward(mean_pool_backward(grad_pool, conv_len))

    def save(self, path: str | Path, meta: Optional[dict] = None) -> Path:
        return save_checkpoint(path, self, self.model_name, self.architecture, meta)

    @classmethod
    def load(cls, path: str | Path):
        header, state = load_checkpoint(path, cls.model_name)
        arch = dict(header["architecture"])
        emb_dim = arch.pop("emb_dim")
        model = cls(emb_dim, PolicyConfig(**arch))
        model.load_state_dict(state)
        return model


class PolicyNetwork(_Trunk):
    model_name = POLICY_MODEL

    def __init__(self, emb_dim: int, config: PolicyConfig, seed: int = 0):
        super().__init__(emb_dim, config, emb_dim, seed)


class CriticNetwork(_Trunk):
    model_name = CRITIC_MODEL

    def __init__(self, emb_dim: int, config: PolicyConfig, seed: int = 0):
        super().__init__(emb_dim, config, 1, seed)


# ──────────────────────────────────────────────────────────────
# Action distribution
# ──────────────────────────────────────────────────────────────
def _unit(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norm = np.maximum(np.linalg.norm(x, axis=-1, keepdims=True), _NORM_FLOOR)
    return x / norm, norm


def action_logits(target: np.ndarray, obf_embeddings: np.ndarray, cosine: bool = False) -> np.ndarray:
    """Inner products <e_t, e_i> (or cosine similarities) for (..., D) targets."""
    obf_embeddings = np.asarray(obf_embeddings, dtype=DTYPE)
    if obf_embeddings.ndim != 2 or obf_embeddings.shape[0] == 0:
        raise DegenerateInputError("empty obfuscation video set")
    if cosine:
        target, _ = _unit(target)
        obf_embeddings, _ = _unit(obf_embeddings)
    return target @ obf_embeddings.T


def action_logits_backward(grad_logits: np.ndarray, target: np.ndarray, obf_embeddings: np.ndarray,
                           cosine: bool = False) -> np.ndarray:
    """Gradient of the logits with respect to the target embedding."""
    if not cosine:
        return grad_logits @ obf_embeddings
    unit_obf, _ = _unit(obf_embeddings)
    unit_t, norm = _unit(target)
    g = grad_logits @ unit_obf
    return (g - unit_t * np.sum(g * unit_t, axis=-1, keepdims=True)) / norm


def action_distribution(target: np.ndarray, obf_embeddings: np.ndarray, cosine: bool = False) -> np.ndarray:
    """pi(i | s) = softmax_i <e_t, e_i>."""
    return softmax(action_logits(target, obf_embeddings, cosine))


def policy_distribution(policy: PolicyNetwork, played: Sequence[int], embeddings: np.ndarray,
                        obf_embeddings: np.ndarray, memory=None):
    """Action probabilities for the state after `played`, plus the advanced LSTM state."""
    window = state_window(embeddings, played, policy.config.window)
    target, memory = policy.step(window, memory)
    return action_distribution(target, obf_embeddings, policy.config.cosine), memory
