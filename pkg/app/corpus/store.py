"""
Corpus persistence.

    corpus.jsonl      header line {"corpus_format": 1, ...} then one VideoRecord per line
    embeddings.npy    float64 matrix, row i = video i
    stats.json        CorpusStats
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Tuple

import numpy as np
from pydantic import ValidationError

from app.corpus.embedding import CorpusStats
from app.corpus.generator import Corpus, VideoRecord, make_classes
from app.errors import DataFormatError

logger = logging.getLogger(__name__)

CORPUS_FORMAT = 1
CORPUS_FILE = "corpus.jsonl"
EMBEDDINGS_FILE = "embeddings.npy"
STATS_FILE = "stats.json"


def save_corpus(directory: str | Path, corpus: Corpus, embeddings: np.ndarray, stats: CorpusStats) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = {
        "corpus_format": CORPUS_FORMAT,
        "n_videos": corpus.n_videos,
        "n_classes": corpus.n_classes,
        "labels": [c.label for c in corpus.classes],
    }
    with open(directory / CORPUS_FILE, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in corpus.records:
            fh.write(rec.model_dump_json() + "\n")
    np.save(directory / EMBEDDINGS_FILE, embeddings)
    (directory / STATS_FILE).write_text(stats.model_dump_json(indent=2), encoding="utf-8")
    logger.info("Saved corpus (%d videos) to %s", corpus.n_videos, directory)
    return directory


def load_corpus(directory: str | Path) -> Tuple[Corpus, np.ndarray, CorpusStats]:
    directory = Path(directory)
    path = directory / CORPUS_FILE
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")

    records = []
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"bad header ({e})", path=str(path), line=1) from e
        if header.get("corpus_format") != CORPUS_FORMAT:
            raise DataFormatError(
                f"unsupported corpus_format {header.get('corpus_format')!r}", path=str(path), line=1
            )
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                records.append(VideoRecord.model_validate_json(line))
            except ValidationError as e:
                raise DataFormatError(str(e), path=str(path), line=lineno) from e

    classes = make_classes(int(header["n_classes"]))
    corpus = Corpus(records, classes)
    embeddings = np.load(directory / EMBEDDINGS_FILE)
    stats = CorpusStats.model_validate_json((directory / STATS_FILE).read_text(encoding="utf-8"))
    if embeddings.shape[0] != corpus.n_videos:
        raise DataFormatError("embedding rows do not match corpus size", path=str(directory / EMBEDDINGS_FILE))
    return corpus, embeddings, stats
