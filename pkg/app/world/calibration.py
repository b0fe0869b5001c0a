from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.metrics.divergence import kl_rows
from app.metrics.normalization import refresh_samples
from app.schemas import CalibrationConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationResult:
    noise_temperature: float
    d_min: float
    iterations: int
    converged: bool


def mean_refresh_divergence(world, personas: Sequence[Sequence[int]], n_refresh_samples: int, seed: int) -> float:
    """Monte-Carlo E[KL(mean C^u, C^u)] over personas x refresh samples."""
    samples = refresh_samples(world, personas, n_refresh_samples, seed)
    n, r, k = samples.shape
    means = np.repeat(samples.mean(axis=1), r, axis=0)
    return float(kl_rows(means, samples.reshape(n * r, k)).mean())


def calibrate_noise_temperature(world, personas: Sequence[Sequence[int]], config: CalibrationConfig,
                                seed: int = 0) -> CalibrationResult:
    """
    Bisection on the Gumbel temperature until the world's own refresh
    divergence hits `config.target_d_min`. The same seeds are reused at every
    evaluation, so the estimate is a deterministic function of the temperature.
    """
    target = config.target_d_min

    def divergence_at(temperature: float) -> float:
        return mean_refresh_divergence(
            world.with_noise_temperature(temperature), personas, config.n_refresh_samples, seed
        )

    lo, hi = 0.0, config.upper_bound
    d_hi = divergence_at(hi)
    if d_hi < target:
        logger.warning(
            "Calibration target %.3f not reachable (d_min=%.3f at T=%.3f); using the upper bound",
            target, d_hi, hi,
        )
        return CalibrationResult(hi, d_hi, 1, False)

    best_t, best_d = hi, d_hi
    for iteration in range(1, config.max_iter + 1):
        mid = 0.5 * (lo + hi)
        d_mid = divergence_at(mid)
        logger.info("Calibration step %d: T=%.4f d_min=%.4f (target %.3f)", iteration, mid, d_mid, target)
        if abs(d_mid - target) < abs(best_d - target):
            best_t, best_d = mid, d_mid
        if abs(d_mid - target) <= config.tolerance / 5:
            return CalibrationResult(mid, d_mid, iteration, True)
        if d_mid < target:
            lo = mid
        else:
            hi = mid
    converged = abs(best_d - target) <= config.tolerance
    if not converged:
        logger.warning("Calibration stopped at T=%.4f with d_min=%.4f", best_t, best_d)
    return CalibrationResult(best_t, best_d, config.max_iter, converged)
