"""
Persona trace files.

Line-delimited JSON. The first line is the header {"persona_format": 1};
every following line is {"user_id": str, "video_ids": [int, ...]}, optionally with
"sources": ["user" | "obfuscation", ...] for obfuscated personas.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.errors import DataFormatError
from app.world.personas import Persona, Source

logger = logging.getLogger(__name__)

PERSONA_FORMAT = 1


class TraceRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    user_id: str
    video_ids: List[int] = Field(default_factory=list)
    sources: Optional[List[Literal["user", "obfuscation"]]] = None


@dataclass
class PersonaImport:
    personas: List[Persona] = field(default_factory=list)
    dropped: int = 0

    def __iter__(self):
        return iter(self.personas)

    def __len__(self):
        return len(self.personas)


def import_personas(path: str | Path, min_len: int = 40, max_len: Optional[int] = None,
                    n_videos: Optional[int] = None) -> PersonaImport:
    """
    Keep traces with at least `min_len` videos (truncated to the first
    `max_len` if given); count the rest as dropped.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"persona trace file not found: {path}")
    result = PersonaImport()
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not any(line.strip() for line in lines):
        return result

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DataFormatError(f"bad header ({e})", path=str(path), line=1) from e
    if not isinstance(header, dict) or header.get("persona_format") != PERSONA_FORMAT:
        raise DataFormatError("missing or unsupported persona_format header", path=str(path), line=1)

    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = TraceRecord.model_validate_json(line)
        except ValidationError as e:
            raise DataFormatError(str(e).splitlines()[0], path=str(path), line=lineno) from e
        if n_videos is not None and any(v < 0 or v >= n_videos for v in record.video_ids):
            raise DataFormatError("video id outside the corpus", path=str(path), line=lineno)
        if record.sources is not None and len(record.sources) != len(record.video_ids):
            raise DataFormatError("sources and video_ids differ in length", path=str(path), line=lineno)
        if len(record.video_ids) < min_len:
            result.dropped += 1
            continue
        ids = record.video_ids[:max_len] if max_len else record.video_ids
        if record.sources is None:
            result.personas.append(Persona.from_user_videos(ids, user_id=record.user_id))
        else:
            tags = tuple(Source(s) for s in record.sources[:len(ids)])
            result.personas.append(Persona(tuple(ids), tags, record.user_id))

    logger.info("Imported %d personas from %s (%d dropped below %d videos)",
                len(result.personas), path, result.dropped, min_len)
    return result


def export_personas(path: str | Path, personas: Iterable[Persona], with_sources: bool = False) -> Path:
    """Write user subsequences in the trace format, or whole tagged personas with `with_sources`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"persona_format": PERSONA_FORMAT}) + "\n")
        for persona in personas:
            if with_sources:
                record = TraceRecord(user_id=persona.user_id, video_ids=list(persona.video_ids),
                                     sources=[s.value for s in persona.sources])
            else:
                record = TraceRecord(user_id=persona.user_id, video_ids=list(persona.user_videos()))
            fh.write(record.model_dump_json(exclude_none=True) + "\n")
            count += 1
    logger.info("Exported %d personas to %s", count, path)
    return path
