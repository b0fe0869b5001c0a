"""
Versioned model checkpoints.

A checkpoint is a single ``.npz`` archive: one array per parameter plus a
``__header__`` entry holding JSON {checkpoint_format, model, architecture,
layers, meta}. Loading never unpickles.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from app.diffnet.core import Module
from app.errors import DataFormatError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1
_HEADER_KEY = "__header__"


def _layer_specs(module: Module) -> list:
    specs = []
    for name, value in vars(module).items():
        spec = getattr(value, "spec", None)
        if spec is not None:
            specs.append({"name": name, **spec.model_dump(exclude_none=True)})
    return specs


def save_checkpoint(path: str | Path, module: Module, model: str,
                    architecture: Dict[str, Any], meta: Dict[str, Any] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "checkpoint_format": CHECKPOINT_FORMAT,
        "model": model,
        "architecture": architecture,
        "layers": _layer_specs(module),
        "meta": meta or {},
    }
    arrays = module.state_dict()
    if _HEADER_KEY in arrays:
        raise ValueError(f"parameter name collides with {_HEADER_KEY}")
    with open(path, "wb") as fh:
        np.savez(fh, **arrays, **{_HEADER_KEY: np.array(json.dumps(header, sort_keys=True))})
    logger.info("Saved %s checkpoint to %s", model, path)
    return path


def load_checkpoint(path: str | Path, expected_model: str | None = None) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Return (header, state) after validating the format version."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data[_HEADER_KEY]))
            state = {k: data[k] for k in data.files if k != _HEADER_KEY}
    except (KeyError, ValueError, OSError) as e:
        raise DataFormatError(f"unreadable checkpoint ({e})", path=str(path)) from e
    if header.get("checkpoint_format") != CHECKPOINT_FORMAT:
        raise DataFormatError(f"unsupported checkpoint_format {header.get('checkpoint_format')!r}", path=str(path))
    if expected_model is not None and header.get("model") != expected_model:
        raise DataFormatError(f"expected a {expected_model} checkpoint, found {header.get('model')!r}", path=str(path))
    return header, state
