"""
Layers with explicit forward/backward passes.

Conventions:
  * Dense:  x (N, in)            -> (N, out)
  * Conv1D: x (B, L, C_in)       -> (B, L - kernel + 1, C_out)   (stride 1, valid)
  * LSTM:   x (T, B, D) + mask   -> H (T, B, hidden)

`forward` caches what `backward` needs; `backward` accumulates into the
parameter gradient buffers (it never zeroes them) and returns the gradient
with respect to the layer input.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from app.diffnet.core import DTYPE, LayerSpec, Module, Parameter, uniform_init


class NoForwardCacheError(RuntimeError):
    """`backward` was called without a preceding `forward`."""


def _require(cache, layer: str):
    if cache is None:
        raise NoForwardCacheError(f"{layer}.backward called before forward")
    return cache


class Dense(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.W = Parameter(uniform_init(rng, in_dim, (in_dim, out_dim)))
        self.b = Parameter(uniform_init(rng, in_dim, (out_dim,)))
        self._cache = None

    def _own_parameters(self) -> Dict[str, Parameter]:
        return {"W": self.W, "b": self.b}

    @property
    def spec(self) -> LayerSpec:
        return LayerSpec(kind="dense", in_dim=self.W.shape[0], out_dim=self.W.shape[1])

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        self._cache = x
        return x @ self.W.values + self.b.values

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x = _require(self._cache, "Dense")
        self.W.grads += x.T @ grad_out
        self.b.grads += grad_out.sum(axis=0)
        return grad_out @ self.W.values.T


class Tanh(Module):
    def __init__(self):
        self._out = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._out = np.tanh(x)
        return self._out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        out = _require(self._out, "Tanh")
        return grad_out * (1.0 - out ** 2)


class Conv1D(Module):
    """1-D convolution over the time axis, stride 1, no padding."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = kernel * in_channels
        self.kernel = kernel
        self.W = Parameter(uniform_init(rng, fan_in, (kernel, in_channels, out_channels)))
        self.b = Parameter(uniform_init(rng, fan_in, (out_channels,)))
        self._cache = None

    def _own_parameters(self) -> Dict[str, Parameter]:
        return {"W": self.W, "b": self.b}

    @property
    def spec(self) -> LayerSpec:
        k, c_in, c_out = self.W.shape
        return LayerSpec(kind="conv1d", in_dim=c_in, out_dim=c_out, kernel=k)

    def _patches(self, x: np.ndarray) -> np.ndarray:
        batch, length, channels = x.shape
        out_len = length - self.kernel + 1
        if out_len < 1:
            raise ValueError(f"sequence length {length} shorter than kernel {self.kernel}")
        # (B, L_out, k, C) -> (B, L_out, k*C)
        stacked = np.stack([x[:, u:u + out_len, :] for u in range(self.kernel)], axis=2)
        return stacked.reshape(batch, out_len, self.kernel * channels)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        patches = self._patches(x)
        w = self.W.values.reshape(-1, self.W.shape[2])
        self._cache = (x.shape, patches)
        return patches @ w + self.b.values

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x_shape, patches = _require(self._cache, "Conv1D")
        k, c_in, c_out = self.W.shape
        flat_p = patches.reshape(-1, k * c_in)
        flat_g = grad_out.reshape(-1, c_out)
        self.W.grads += (flat_p.T @ flat_g).reshape(k, c_in, c_out)
        self.b.grads += flat_g.sum(axis=0)
        d_patches = (grad_out @ self.W.values.reshape(-1, c_out).T).reshape(
            x_shape[0], -1, k, c_in
        )
        out_len = d_patches.shape[1]
        dx = np.zeros(x_shape, dtype=DTYPE)
        for u in range(k):
            dx[:, u:u + out_len, :] += d_patches[:, :, u, :]
        return dx


class LSTM(Module):
    """
    Single-layer LSTM with gate order (input, forget, output, candidate).

    A mask of shape (T, B) freezes h and c for padded steps, so the hidden
    state at the last time index is the state after each sequence's own
    final element.
    """

    def __init__(self, in_dim: int, hidden_dim: int, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_dim + hidden_dim
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        self.W = Parameter(uniform_init(rng, fan_in, (fan_in, 4 * hidden_dim)))
        self.b = Parameter(uniform_init(rng, fan_in, (4 * hidden_dim,)))
        self._cache = None
        self.dh0: Optional[np.ndarray] = None
        self.dc0: Optional[np.ndarray] = None

    def _own_parameters(self) -> Dict[str, Parameter]:
        return {"W": self.W, "b": self.b}

    @property
    def spec(self) -> LayerSpec:
        return LayerSpec(kind="lstm", in_dim=self.in_dim, out_dim=self.hidden_dim, hidden_dim=self.hidden_dim)

    def initial_state(self, batch: int) -> Tuple[np.ndarray, np.ndarray]:
        zeros = np.zeros((batch, self.hidden_dim), dtype=DTYPE)
        return zeros, zeros.copy()

    def _gates(self, x: np.ndarray, h: np.ndarray):
        hd = self.hidden_dim
        z = x @ self.W.values[: self.in_dim] + h @ self.W.values[self.in_dim:] + self.b.values
        i = expit(z[:, :hd])
        f = expit(z[:, hd:2 * hd])
        o = expit(z[:, 2 * hd:3 * hd])
        g = np.tanh(z[:, 3 * hd:])
        return i, f, o, g

    def step(self, x: np.ndarray, h: np.ndarray, c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """One recurrent step without caching (inference / rollouts)."""
        i, f, o, g = self._gates(np.asarray(x, dtype=DTYPE), h)
        c_new = f * c + i * g
        return o * np.tanh(c_new), c_new

    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None,
                h0: Optional[np.ndarray] = None, c0: Optional[np.ndarray] = None) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        steps, batch, _ = x.shape
        if mask is None:
            mask = np.ones((steps, batch), dtype=DTYPE)
        mask = np.asarray(mask, dtype=DTYPE)
        h_prev, c_prev = self.initial_state(batch)
        if h0 is not None:
            h_prev = np.array(h0, dtype=DTYPE)
        if c0 is not None:
            c_prev = np.array(c0, dtype=DTYPE)

        out = np.zeros((steps, batch, self.hidden_dim), dtype=DTYPE)
        records = []
        for t in range(steps):
            i, f, o, g = self._gates(x[t], h_prev)
            c_tilde = f * c_prev + i * g
            tanh_c = np.tanh(c_tilde)
            h_tilde = o * tanh_c
            m = mask[t][:, None]
            c_t = m * c_tilde + (1.0 - m) * c_prev
            h_t = m * h_tilde + (1.0 - m) * h_prev
            records.append((h_prev, c_prev, i, f, o, g, tanh_c, m))
            out[t] = h_t
            h_prev, c_prev = h_t, c_t
        self._cache = (x, records)
        self.last_cell = c_prev
        return out

    def backward(self, grad_out: np.ndarray, grad_h_last: Optional[np.ndarray] = None,
                 grad_c_last: Optional[np.ndarray] = None) -> np.ndarray:
        """Backpropagation through time over the cached sequence."""
        x, records = _require(self._cache, "LSTM")
        steps, batch, _ = x.shape
        hd = self.hidden_dim
        w_x = self.W.values[: self.in_dim]
        w_h = self.W.values[self.in_dim:]

        dx = np.zeros_like(x)
        dW = np.zeros_like(self.W.values)
        db = np.zeros_like(self.b.values)
        dh_next = np.zeros((batch, hd)) if grad_h_last is None else np.array(grad_h_last, dtype=DTYPE)
        dc_next = np.zeros((batch, hd)) if grad_c_last is None else np.array(grad_c_last, dtype=DTYPE)

        for t in reversed(range(steps)):
            h_prev, c_prev, i, f, o, g, tanh_c, m = records[t]
            dh = grad_out[t] + dh_next
            dh_tilde = m * dh
            dc_tilde = m * dc_next + dh_tilde * o * (1.0 - tanh_c ** 2)

            do = dh_tilde * tanh_c
            di = dc_tilde * g
            dg = dc_tilde * i
            df = dc_tilde * c_prev

            dz = np.concatenate(
                [di * i * (1.0 - i), df * f * (1.0 - f), do * o * (1.0 - o), dg * (1.0 - g ** 2)],
                axis=1,
            )
            dW[: self.in_dim] += x[t].T @ dz
            dW[self.in_dim:] += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[t] = dz @ w_x.T

            dh_next = dz @ w_h.T + (1.0 - m) * dh
            dc_next = dc_tilde * f + (1.0 - m) * dc_next

        self.W.grads += dW
        self.b.grads += db
        self.dh0, self.dc0 = dh_next, dc_next
        return dx


def mean_pool(x: np.ndarray) -> np.ndarray:
    """Average over the time axis of (B, L, C)."""
    return x.mean(axis=1)


def mean_pool_backward(grad_out: np.ndarray, length: int) -> np.ndarray:
    return np.repeat(grad_out[:, None, :] / length, length, axis=1)


def pad_sequences(sequences, dim: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stack variable-length (n_i, D) arrays into a time-major (T, B, D) batch
    plus a (T, B) mask; padding sits after each sequence's end.
    """
    if len(sequences) == 0:
        raise ValueError("no sequences to pad")
    lengths = [len(s) for s in sequences]
    if min(lengths) < 1:
        raise ValueError("sequences must contain at least one step")
    dim = dim if dim is not None else np.asarray(sequences[0]).shape[1]
    steps = max(lengths)
    x = np.zeros((steps, len(sequences), dim), dtype=DTYPE)
    mask = np.zeros((steps, len(sequences)), dtype=DTYPE)
    for b, seq in enumerate(sequences):
        n = lengths[b]
        x[:n, b, :] = seq
        mask[:n, b] = 1.0
    return x, mask
