"""
Exact information quantities on joint probability tables.

A joint is an ndarray with one axis per random variable, or a SparseJoint
holding only the non-zero cells of such a table. Variable groups are given
as tuples of axis indices, e.g. I((0, 1); (3,)) is the mutual information
between the pair (X0, X1) and X3. Natural log throughout.

Every quantity is a sum over the non-zero cells, so a SparseJoint never
has to be expanded to its full shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from app.errors import DegenerateInputError

NORMALIZATION_TOLERANCE = 1e-9

Axes = Tuple[int, ...]


@dataclass(frozen=True)
class SparseJoint:
    """Non-zero cells of a joint table: `coords` (n, ndim) indices with masses `probs` (n,)."""

    coords: np.ndarray
    probs: np.ndarray
    shape: Tuple[int, ...]

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @classmethod
    def from_dense(cls, joint: np.ndarray) -> "SparseJoint":
        idx = np.nonzero(joint)
        return cls(np.stack(idx, axis=1).astype(np.int64), joint[idx], tuple(joint.shape))

    @classmethod
    def from_cells(cls, coords: np.ndarray, probs: np.ndarray, shape: Sequence[int]) -> "SparseJoint":
        """Merge repeated cells by summing their mass; zero-mass cells are dropped."""
        shape = tuple(int(s) for s in shape)
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, len(shape))
        probs = np.asarray(probs, dtype=np.float64).ravel()
        if coords.shape[0] != probs.size:
            raise DegenerateInputError("coords and probs must have one row per cell")
        if np.any(coords < 0) or np.any(coords >= np.asarray(shape)):
            raise DegenerateInputError("cell index outside the table shape")
        keys = np.ravel_multi_index(tuple(coords.T), shape)
        unique, inverse = np.unique(keys, return_inverse=True)
        mass = np.bincount(inverse.ravel(), weights=probs, minlength=unique.size)
        keep = mass != 0
        cells = np.stack(np.unravel_index(unique[keep], shape), axis=1).astype(np.int64)
        return cls(cells, mass[keep], shape)

    def todense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        np.add.at(out, tuple(self.coords.T), self.probs)
        return out


Joint = Union[np.ndarray, SparseJoint]


def validate_joint(joint: Joint) -> SparseJoint:
    """Check the table is a distribution and return its non-zero cells."""
    if isinstance(joint, SparseJoint):
        probs = joint.probs
        if probs.size == 0:
            raise DegenerateInputError("joint table is empty")
    else:
        joint = np.asarray(joint, dtype=np.float64)
        if joint.size == 0:
            raise DegenerateInputError("joint table is empty")
        probs = joint
    if np.any(probs < 0) or np.any(~np.isfinite(probs)):
        raise DegenerateInputError("joint table has negative or non-finite entries")
    total = probs.sum()
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise DegenerateInputError(f"joint table sums to {total!r}, expected 1")
    if isinstance(joint, SparseJoint):
        positive = joint.probs > 0
        return joint if positive.all() else SparseJoint(joint.coords[positive], joint.probs[positive], joint.shape)
    return SparseJoint.from_dense(joint)


def _axes(group: Sequence[int] | int) -> Axes:
    if isinstance(group, (int, np.integer)):
        return (int(group),)
    return tuple(int(a) for a in group)


def _disjoint(*groups: Axes) -> None:
    seen: set = set()
    for group in groups:
        if seen & set(group):
            raise DegenerateInputError("variable groups must be disjoint")
        seen |= set(group)


def _log_mass(joint: SparseJoint, axes: Axes) -> np.ndarray:
    """ln p(group value) evaluated at every non-zero cell."""
    if not axes:
        return np.zeros(joint.probs.size)
    if any(a < 0 or a >= joint.ndim for a in axes):
        raise DegenerateInputError(f"axis out of range for a {joint.ndim}-variable joint")
    keys = np.ravel_multi_index(tuple(joint.coords[:, axes].T), tuple(joint.shape[a] for a in axes))
    _, inverse = np.unique(keys, return_inverse=True)
    inverse = inverse.ravel()
    mass = np.bincount(inverse, weights=joint.probs)
    return np.log(mass[inverse])


def marginal(joint: Joint, keep: Sequence[int]) -> np.ndarray:
    """Dense marginal over `keep` axes, one axis per variable in `keep` order."""
    keep = _axes(keep)
    if isinstance(joint, SparseJoint):
        out = np.zeros(tuple(joint.shape[a] for a in keep), dtype=np.float64)
        np.add.at(out, tuple(joint.coords[:, a] for a in keep), joint.probs)
        return out
    drop = tuple(a for a in range(joint.ndim) if a not in keep)
    m = joint.sum(axis=drop)
    # sum() leaves kept axes in ascending order; put them in the order requested
    order = sorted(keep)
    m = np.moveaxis(m, [order.index(a) for a in keep], range(len(keep)))
    return m


def entropy(joint: Joint, group: Sequence[int] | int) -> float:
    """H(group) in nats."""
    joint = validate_joint(joint)
    return float(-(joint.probs @ _log_mass(joint, _axes(group))))


def discrete_mutual_information(joint: Joint, x: Sequence[int] | int, y: Sequence[int] | int) -> float:
    """I(X; Y) = sum p(x,y) ln[p(x,y) / (p(x) p(y))]."""
    joint = validate_joint(joint)
    x, y = _axes(x), _axes(y)
    _disjoint(x, y)
    terms = _log_mass(joint, x + y) - _log_mass(joint, x) - _log_mass(joint, y)
    return float(joint.probs @ terms)


def conditional_mutual_information(joint: Joint, x, y, z) -> float:
    """I(X; Y | Z) = sum p(x,y,z) ln[p(z) p(x,y,z) / (p(x,z) p(y,z))]."""
    joint = validate_joint(joint)
    x, y, z = _axes(x), _axes(y), _axes(z)
    _disjoint(x, y, z)
    terms = (_log_mass(joint, z) + _log_mass(joint, x + y + z)
             - _log_mass(joint, x + z) - _log_mass(joint, y + z))
    return float(joint.probs @ terms)
