import datetime

from sqlalchemy import JSON, Column, DateTime, Integer, String, Text, UniqueConstraint

from app.database.database import Base

STATUS_PENDING = "pending"
STATUS_PROCESSING = "processing"
STATUS_COMPLETED = "completed"
STATUS_FAILED = "failed"


class StageRun(Base):
    """
    One pipeline stage for one config hash.

    Status: pending → processing → completed / failed. A completed row whose
    artifacts still exist lets a rerun skip the stage.
    """

    __tablename__ = "stage_runs"
    __table_args__ = (UniqueConstraint("config_hash", "stage", name="uq_stage_runs_config_stage"),)

    id = Column(Integer, primary_key=True, autoincrement=True)
    config_hash = Column(String(32), nullable=False, index=True)
    stage = Column(String(64), nullable=False)
    status = Column(String(16), nullable=False, default=STATUS_PENDING)

    # Relative paths (under the run directory) written by the stage
    artifacts = Column(JSON, nullable=False, default=dict)
    error = Column(Text)
    attempts = Column(Integer, nullable=False, default=0)

    created_at = Column(DateTime, default=datetime.datetime.utcnow, nullable=False)
    updated_at = Column(
        DateTime,
        default=datetime.datetime.utcnow,
        onupdate=datetime.datetime.utcnow,
        nullable=False,
    )

    def __repr__(self):
        return f"<StageRun config_hash={self.config_hash} stage={self.stage} status={self.status}>"
