from datetime import datetime
from typing import Dict, List, Optional

from sqlalchemy import select
from sqlalchemy.orm import Session

from app.database.models import (
    STATUS_COMPLETED,
    STATUS_FAILED,
    STATUS_PROCESSING,
    StageRun,
)


# READ
def get_stage_run(db: Session, config_hash: str, stage: str) -> Optional[StageRun]:
    """Return the registry row or None."""
    return db.execute(
        select(StageRun).where(StageRun.config_hash == config_hash, StageRun.stage == stage)
    ).scalar_one_or_none()


def list_stage_runs(db: Session, config_hash: str) -> List[StageRun]:
    return list(
        db.execute(select(StageRun).where(StageRun.config_hash == config_hash).order_by(StageRun.id)).scalars()
    )


# UPDATE – lifecycle
def start_stage(db: Session, config_hash: str, stage: str) -> StageRun:
    """Create or reset the row and mark it 'processing'."""
    run = get_stage_run(db, config_hash, stage)
    if run is None:
        run = StageRun(config_hash=config_hash, stage=stage, artifacts={}, attempts=0)
        db.add(run)
    run.status = STATUS_PROCESSING
    run.error = None
    run.attempts = (run.attempts or 0) + 1
    run.updated_at = datetime.utcnow()
    db.flush()
    return run


def complete_stage(db: Session, config_hash: str, stage: str, artifacts: Dict[str, str]) -> None:
    run = get_stage_run(db, config_hash, stage)
    if not run:
        return
    run.status = STATUS_COMPLETED
    run.artifacts = dict(artifacts)
    run.updated_at = datetime.utcnow()
    db.flush()


def fail_stage(db: Session, config_hash: str, stage: str, error: str) -> None:
    run = get_stage_run(db, config_hash, stage)
    if not run:
        return
    run.status = STATUS_FAILED
    run.error = error
    run.updated_at = datetime.utcnow()
    db.flush()


def is_completed(db: Session, config_hash: str, stage: str) -> bool:
    run = get_stage_run(db, config_hash, stage)
    return run is not None and run.status == STATUS_COMPLETED
