"""
KL-based privacy and utility metrics.

All divergences use natural logs unless `base` is given. Entries below
EPS_FLOOR are raised to EPS_FLOOR in both arguments before the sum and the
vectors are NOT renormalized afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Sequence

import numpy as np

from app.errors import DegenerateInputError

EPS_FLOOR = 1e-4
SUM_TOLERANCE = 1e-6


def validate_distribution(p: Sequence[float] | np.ndarray, name: str = "distribution") -> np.ndarray:
    """Return `p` as a float array after checking it lies on the simplex."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DegenerateInputError(f"{name} must be a non-empty vector")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DegenerateInputError(f"{name} has negative or non-finite entries")
    if abs(arr.sum() - 1.0) > SUM_TOLERANCE:
        raise DegenerateInputError(f"{name} sums to {arr.sum():.8f}, expected 1")
    return arr


def floored(p: np.ndarray, floor: float = EPS_FLOOR) -> np.ndarray:
    return np.maximum(np.asarray(p, dtype=np.float64), floor)


def kl_rows(p: np.ndarray, q: np.ndarray, floor: float = EPS_FLOOR, base: float = math.e) -> np.ndarray:
    """Row-wise floored KL(p_i || q_i) for two (N, K) arrays."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if p.shape != q.shape:
        raise DegenerateInputError(f"dimension mismatch: {p.shape} vs {q.shape}")
    pf, qf = floored(p, floor), floored(q, floor)
    values = np.sum(pf * np.log(pf / qf), axis=1)
    if base != math.e:
        values = values / math.log(base)
    # flooring without renormalization can dip a hair below zero
    return np.maximum(values, 0.0)


def kl_divergence(p, q, floor: float = EPS_FLOOR, base: float = math.e) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DegenerateInputError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(kl_rows(p[None, :], q[None, :], floor=floor, base=base)[0])


def _paired(a, b, what: str):
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise DegenerateInputError(f"{what}: empty sample set")
    if a.shape != b.shape:
        raise DegenerateInputError(f"{what}: sample arrays differ in shape {a.shape} vs {b.shape}")
    return a, b


def privacy(c_o_samples, c_u_samples, base: float = math.e) -> float:
    """P = mean KL(C^o || C^u) over paired samples."""
    c_o, c_u = _paired(c_o_samples, c_u_samples, "privacy")
    return float(np.mean(kl_rows(c_o, c_u, base=base)))


def utility_loss(c_hat_samples, c_u_samples, base: float = math.e) -> float:
    """U_Loss = mean KL(Ĉ^u || C^u)."""
    c_hat, c_u = _paired(c_hat_samples, c_u_samples, "utility_loss")
    return float(np.mean(kl_rows(c_hat, c_u, base=base)))


def privacy_norm(p: float, norms) -> float:
    """(P - d_min) / (d_max - d_min), not clamped."""
    span = norms.d_max - norms.d_min
    if span <= 0:
        raise DegenerateInputError(f"d_max ({norms.d_max}) must exceed d_min ({norms.d_min})")
    return (p - norms.d_min) / span


def utility_gain_norm(p: float, u_loss: float, d_min: float) -> float:
    """(P - U_Loss) / (P - d_min)."""
    if p == d_min:
        raise DegenerateInputError("utility gain undefined when P equals d_min")
    return (p - u_loss) / (p - d_min)


# ──────────────────────────────────────────────────────────────
# Personalized objective
# ──────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class PersonalizationSpec:
    sensitive_classes: FrozenSet[int]
    lam: float = 1.0
    epsilon: float = 1e-4

    @classmethod
    def create(cls, sensitive: Iterable[int], n_classes: int, lam: float = 1.0,
               epsilon: float = 1e-4) -> "PersonalizationSpec":
        sensitive = frozenset(int(c) for c in sensitive)
        if any(c < 0 or c >= n_classes for c in sensitive):
            raise DegenerateInputError("sensitive class id out of range")
        if len(sensitive) >= n_classes:
            raise DegenerateInputError("sensitive classes must be a proper subset of all classes")
        if lam < 0 or epsilon <= 0:
            raise DegenerateInputError("lam must be >= 0 and epsilon > 0")
        return cls(sensitive, float(lam), float(epsilon))


@dataclass(frozen=True)
class PersonalizedPrivacy:
    value: float
    d_nonsens: float
    d_sens: float


def personalized_components(c_o: np.ndarray, c_u: np.ndarray, spec: PersonalizationSpec):
    """Row-wise (D_nonsens, D_sens) arrays for (N, K) inputs."""
    c_o = floored(np.atleast_2d(c_o))
    c_u = floored(np.atleast_2d(c_u))
    if c_o.shape != c_u.shape:
        raise DegenerateInputError(f"dimension mismatch: {c_o.shape} vs {c_u.shape}")
    k = c_o.shape[1]
    sens = np.zeros(k, dtype=bool)
    sens[list(spec.sensitive_classes)] = True
    nonsens = ~sens
    d_nonsens = np.sum(c_o[:, nonsens] * np.log(c_o[:, nonsens] / c_u[:, nonsens]), axis=1)
    d_sens = np.sum(c_o[:, sens] * np.log(c_o[:, sens] / spec.epsilon), axis=1)
    return d_nonsens, d_sens


def personalized_privacy(c_o, c_u, spec: PersonalizationSpec) -> PersonalizedPrivacy:
    """D_nonsens - lam * D_sens for a single pair of distributions."""
    d_nonsens, d_sens = personalized_components(np.asarray(c_o), np.asarray(c_u), spec)
    dn, ds = float(d_nonsens[0]), float(d_sens[0])
    return PersonalizedPrivacy(value=dn - spec.lam * ds, d_nonsens=dn, d_sens=ds)
