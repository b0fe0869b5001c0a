"""
Central SQLAlchemy setup for the stage-run registry.

*   The URL comes from `app.settings.database_url()`: DATABASE_URL when set,
    otherwise a SQLite file next to the run artifacts.
*   One Engine (pre-ping, 2.0 style) and one session factory per URL.
*   `db_session()` commits on success, rolls back on error, always closes.
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from typing import Dict, Generator

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from app import settings

logger = logging.getLogger(__name__)

# --------------------------------------------------------------------------- #
# Declarative base
# --------------------------------------------------------------------------- #
Base = declarative_base()

_ENGINES: Dict[str, Engine] = {}
_FACTORIES: Dict[str, sessionmaker] = {}


# --------------------------------------------------------------------------- #
# Engine / session factory
# --------------------------------------------------------------------------- #
def get_engine(url: str) -> Engine:
    engine = _ENGINES.get(url)
    if engine is None:
        kwargs = {"pool_pre_ping": True, "echo": settings.SQLALCHEMY_ECHO, "future": True}
        if not url.startswith("sqlite"):
            kwargs.update(pool_size=5, max_overflow=10, pool_recycle=1800)
        engine = create_engine(url, **kwargs)
        _ENGINES[url] = engine
        logger.debug("Created engine for %s", engine.url.render_as_string(hide_password=True))
    return engine


def SessionLocal(url: str) -> Session:
    factory = _FACTORIES.get(url)
    if factory is None:
        factory = sessionmaker(bind=get_engine(url), expire_on_commit=False, autoflush=False, autocommit=False)
        _FACTORIES[url] = factory
    return factory()


# --------------------------------------------------------------------------- #
# Helpers
# --------------------------------------------------------------------------- #
@contextmanager
def db_session(url: str) -> Generator[Session, None, None]:
    """
    Context-manager version::

        with db_session(url) as db:
            db.query(...)
    """
    db = SessionLocal(url)
    try:
        yield db
        db.commit()
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()


def init_db(url: str) -> None:
    """Create the registry tables if they do not exist yet."""
    import app.database.models  # noqa: F401  ensure models are registered

    Base.metadata.create_all(bind=get_engine(url))


def dispose_engines() -> None:
    for engine in _ENGINES.values():
        engine.dispose()
    _ENGINES.clear()
    _FACTORIES.clear()
