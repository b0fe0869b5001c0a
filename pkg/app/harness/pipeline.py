"""
Pipeline orchestration.

Stages run in registry order. The stage-run registry (SQLAlchemy) records
each stage per config hash; a stage already `completed` whose artifacts are
still on disk is loaded instead of recomputed. Any failure is recorded,
logged and re-raised as StageFailure with the stage name; artifacts written
so far stay on disk.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from app import settings
from app.database import crud
from app.database.database import db_session, init_db
from app.errors import StageFailure
from app.harness.artifacts import RunArtifacts
from app.harness.stages import CORE_STAGES, STAGES, BaseStage, PipelineContext
from app.schemas import ExperimentConfig

logger = logging.getLogger(__name__)

_BY_NAME: Dict[str, BaseStage] = {stage.name: stage for stage in STAGES}


@dataclass
class PipelineResult:
    artifacts: RunArtifacts
    context: PipelineContext
    stages: Dict[str, Dict[str, str]] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)
    uploaded: List[str] = field(default_factory=list)

    @property
    def run_dir(self) -> Path:
        return self.artifacts.root


def _event(event: str, **fields) -> None:
    logger.info(json.dumps({"event": event, **fields}, sort_keys=True, default=str))


def resolve_stages(targets: Iterable[str]) -> List[BaseStage]:
    """Targets plus everything they require, in registry order."""
    wanted = set()

    def visit(name: str) -> None:
        if name not in _BY_NAME:
            raise ValueError(f"unknown stage: {name}")
        if name in wanted:
            return
        wanted.add(name)
        for dep in _BY_NAME[name].requires:
            visit(dep)

    for target in targets:
        visit(target)
    return [stage for stage in STAGES if stage.name in wanted]


def _try_resume(ctx: PipelineContext, stage: BaseStage, url: str) -> Optional[Dict[str, str]]:
    config_hash = ctx.artifacts.config_hash
    with db_session(url) as db:
        run = crud.get_stage_run(db, config_hash, stage.name)
        if run is None or not crud.is_completed(db, config_hash, stage.name):
            return None
        artifacts = dict(run.artifacts or {})
    if not ctx.artifacts.exists(artifacts.values()):
        logger.warning("Stage '%s' is registered as completed but artifacts are missing; rerunning", stage.name)
        return None
    stage.load(ctx, artifacts)
    return artifacts


def run_pipeline(
    config: ExperimentConfig,
    targets: Sequence[str] = CORE_STAGES,
    output_dir: Optional[str | Path] = None,
    database_url: Optional[str] = None,
    force: bool = False,
    upload: bool = False,
    bucket_name: Optional[str] = None,
) -> PipelineResult:
    """
    Run `targets` (and their prerequisites) for `config`.

    With `force`, completed stages are recomputed instead of loaded. With
    `upload`, the run directory is copied to Cloud Storage afterwards.
    """
    output_dir = Path(output_dir or settings.OUTPUT_DIR or config.output_dir)
    artifacts = RunArtifacts(output_dir, config).prepare()
    url = database_url or settings.database_url(output_dir)
    init_db(url)
    ctx = PipelineContext(config=config, artifacts=artifacts)
    result = PipelineResult(artifacts=artifacts, context=ctx)
    plan = resolve_stages(targets)
    config_hash = artifacts.config_hash
    _event("pipeline_started", config_hash=config_hash, stages=[s.name for s in plan], run_dir=str(artifacts.root))
    started = time.monotonic()

    for stage in plan:
        if not force:
            try:
                resumed = _try_resume(ctx, stage, url)
            except Exception as e:
                logger.warning("Could not load stage '%s' (%s); rerunning", stage.name, e)
                resumed = None
            if resumed is not None:
                result.stages[stage.name] = resumed
                result.skipped.append(stage.name)
                _event("stage_skipped", stage=stage.name, config_hash=config_hash)
                continue

        with db_session(url) as db:
            crud.start_stage(db, config_hash, stage.name)
        _event("stage_started", stage=stage.name, config_hash=config_hash)
        stage_start = time.monotonic()
        try:
            produced = stage.run(ctx)
        except Exception as e:
            logger.error("Stage '%s' failed: %s", stage.name, str(e), exc_info=True)
            with db_session(url) as db:
                crud.fail_stage(db, config_hash, stage.name, f"{type(e).__name__}: {e}")
            _event("stage_failed", stage=stage.name, config_hash=config_hash, error=f"{type(e).__name__}: {e}")
            raise StageFailure(stage.name, e) from e
        with db_session(url) as db:
            crud.complete_stage(db, config_hash, stage.name, produced)
        result.stages[stage.name] = produced
        _event("stage_completed", stage=stage.name, config_hash=config_hash,
               seconds=round(time.monotonic() - stage_start, 3), artifacts=len(produced))

    _event("pipeline_completed", config_hash=config_hash, seconds=round(time.monotonic() - started, 3),
           skipped=result.skipped)
    if upload:
        from app.storage.gcs import upload_run_artifacts

        result.uploaded = upload_run_artifacts(artifacts.root, bucket_name=bucket_name)
        _event("artifacts_uploaded", config_hash=config_hash, files=len(result.uploaded))
    return result
