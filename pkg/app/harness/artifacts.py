"""
On-disk layout of one run:

    <output_dir>/<config_hash>/
        config.json        validated config snapshot
        corpus/            corpus.jsonl, embeddings.npy, stats.json
        personas/          persona trace files
        checkpoints/       model checkpoints (.npz)
        raw/               raw C^u / C^o / C^u_hat arrays (.npz)
        metrics/           report tables (.csv + .json)
        curves/            learning curves (.csv + .json)
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping

import numpy as np

from app.errors import DataFormatError
from app.harness import reports
from app.schemas import ExperimentConfig

logger = logging.getLogger(__name__)

SUBDIRS = ("corpus", "personas", "checkpoints", "raw", "metrics", "curves")


class RunArtifacts:
    def __init__(self, output_dir: str | Path, config: ExperimentConfig):
        self.config = config
        self.config_hash = config.config_hash()
        self.root = Path(output_dir) / self.config_hash

    def prepare(self) -> "RunArtifacts":
        for sub in SUBDIRS:
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        snapshot = json.dumps(self.config.model_dump(mode="json"), sort_keys=True, indent=2)
        (self.root / "config.json").write_text(snapshot + "\n", encoding="utf-8")
        return self

    # ----------------------------------------------------------
    def directory(self, kind: str) -> Path:
        if kind not in SUBDIRS:
            raise ValueError(f"unknown artifact kind: {kind}")
        return self.root / kind

    def path(self, kind: str, name: str) -> Path:
        return self.directory(kind) / name

    def relative(self, path: Path) -> str:
        return Path(path).relative_to(self.root).as_posix()

    def resolve(self, relative: str) -> Path:
        return self.root / relative

    def exists(self, relatives: Iterable[str]) -> bool:
        return all(self.resolve(r).exists() for r in relatives)

    def files(self) -> List[Path]:
        return sorted(p for p in self.root.rglob("*") if p.is_file())

    # ----------------------------------------------------------
    def write_json(self, kind: str, name: str, payload: Mapping[str, Any]) -> str:
        path = self.path(kind, name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return self.relative(path)

    def read_json(self, kind: str, name: str) -> Dict[str, Any]:
        path = self.path(kind, name)
        if not path.exists():
            raise FileNotFoundError(f"artifact not found: {path}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DataFormatError(f"invalid JSON ({e})", path=str(path)) from e

    def write_table(self, kind: str, name: str, rows: Iterable[Mapping]) -> str:
        path = reports.write_table(rows, self.path(kind, f"{name}.csv"), self.config_hash)
        return self.relative(path)

    def write_arrays(self, name: str, **arrays: np.ndarray) -> str:
        path = self.path("raw", f"{name}.npz")
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
        return self.relative(path)

    def read_arrays(self, name: str) -> Dict[str, np.ndarray]:
        path = self.path("raw", f"{name}.npz")
        if not path.exists():
            raise FileNotFoundError(f"raw arrays not found: {path}")
        with np.load(path, allow_pickle=False) as data:
            return {k: data[k] for k in data.files}
