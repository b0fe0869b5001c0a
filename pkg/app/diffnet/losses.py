from __future__ import annotations

from typing import Literal, Tuple

import numpy as np
from scipy.special import expit, log_softmax as _log_softmax, softmax as _softmax

from app.diffnet.core import DTYPE

TARGET_FLOOR = 1e-12


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax; shift invariant and exactly normalized up to rounding."""
    return _softmax(np.asarray(logits, dtype=DTYPE), axis=-1)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    return _log_softmax(np.asarray(logits, dtype=DTYPE), axis=-1)


def kl_loss(
    pred_logits: np.ndarray,
    target: np.ndarray,
    direction: Literal["forward", "reverse"] = "forward",
) -> Tuple[float, np.ndarray]:
    """
    Batch-mean KL loss between a target distribution and softmax(pred_logits).

    forward:  KL(target || softmax(pred))   (training default)
    reverse:  KL(softmax(pred) || target)

    Returns (loss, d loss / d logits) with the gradient already divided by
    the batch size.
    """
    logits = np.atleast_2d(np.asarray(pred_logits, dtype=DTYPE))
    target = np.atleast_2d(np.asarray(target, dtype=DTYPE))
    if logits.shape != target.shape:
        raise ValueError(f"logits {logits.shape} and target {target.shape} differ in shape")
    batch = logits.shape[0]
    log_q = log_softmax(logits)
    q = np.exp(log_q)

    if direction == "forward":
        log_t = np.log(np.maximum(target, TARGET_FLOOR))
        per_row = np.sum(np.where(target > 0, target * (log_t - log_q), 0.0), axis=1)
        grad = q * target.sum(axis=1, keepdims=True) - target
    elif direction == "reverse":
        log_t = np.log(np.maximum(target, TARGET_FLOOR))
        a = log_q - log_t
        per_row = np.sum(q * a, axis=1)
        grad = q * (a - per_row[:, None])
    else:
        raise ValueError(f"unknown KL direction: {direction}")

    loss = float(np.sum(per_row, dtype=np.float64) / batch)
    return loss, grad / batch


def bce_with_logits(logits: np.ndarray, labels: np.ndarray, weights: np.ndarray | None = None) -> Tuple[float, np.ndarray]:
    """Mean binary cross-entropy over the (optionally weighted) entries."""
    z = np.asarray(logits, dtype=DTYPE)
    y = np.asarray(labels, dtype=DTYPE)
    w = np.ones_like(z) if weights is None else np.asarray(weights, dtype=DTYPE)
    total = w.sum()
    if total <= 0:
        return 0.0, np.zeros_like(z)
    # softplus(z) - y*z, written stably
    per = np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))
    loss = float(np.sum(w * per) / total)
    grad = w * (expit(z) - y) / total
    return loss, grad
