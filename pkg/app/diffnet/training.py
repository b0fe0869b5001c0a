"""Mini-batch epoch loop shared by the supervised models."""

from __future__ import annotations

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app.diffnet.optim import SGD

logger = logging.getLogger(__name__)


def split_indices(n: int, test_fraction: float, rng: np.random.Generator):
    """Shuffled train/test index split (test gets round(n * test_fraction), at least 1)."""
    order = rng.permutation(n)
    n_test = min(max(1, int(round(n * test_fraction))), n - 1)
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def train_epochs(
    optimizer: SGD,
    train_idx: np.ndarray,
    batch_size: int,
    epochs: int,
    rng: np.random.Generator,
    step: Callable[[np.ndarray], float],
    evaluate: Optional[Callable[[], float]] = None,
    name: str = "model",
) -> List[Dict[str, float]]:
    """
    Run `epochs` passes over `train_idx` in shuffled mini-batches.

    `step(batch_indices)` does forward + backward and returns the batch
    loss; gradients are zeroed before and applied after every call.
    """
    curve: List[Dict[str, float]] = []
    for epoch in range(1, epochs + 1):
        order = train_idx[rng.permutation(len(train_idx))]
        losses = []
        weights = []
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            optimizer.zero_grad()
            losses.append(step(batch))
            weights.append(len(batch))
            optimizer.step()
        row = {"epoch": epoch, "train_loss": float(np.average(losses, weights=weights))}
        if evaluate is not None:
            row["test_loss"] = float(evaluate())
        curve.append(row)
        logger.info("%s epoch %d/%d train_loss=%.5f%s", name, epoch, epochs, row["train_loss"],
                    f" test_loss={row['test_loss']:.5f}" if "test_loss" in row else "")
    return curve


def take(items: Sequence, idx: np.ndarray) -> list:
    return [items[i] for i in idx]
