import pytest

from app.database import crud
from app.database.database import db_session, init_db
from app.database.models import STATUS_FAILED, STATUS_PROCESSING


@pytest.fixture
def db(registry_url):
    init_db(registry_url)
    return registry_url


def test_stage_lifecycle(db):
    with db_session(db) as session:
        run = crud.start_stage(session, "hash1", "corpus")
        assert run.status == STATUS_PROCESSING
        assert run.attempts == 1
    with db_session(db) as session:
        crud.complete_stage(session, "hash1", "corpus", {"corpus": "corpus/corpus.jsonl"})
    with db_session(db) as session:
        assert crud.is_completed(session, "hash1", "corpus")
        assert crud.get_stage_run(session, "hash1", "corpus").artifacts == {"corpus": "corpus/corpus.jsonl"}


def test_restart_after_failure_counts_attempts(db):
    with db_session(db) as session:
        crud.start_stage(session, "hash1", "world")
        crud.fail_stage(session, "hash1", "world", "RuntimeError: boom")
    with db_session(db) as session:
        run = crud.get_stage_run(session, "hash1", "world")
        assert run.status == STATUS_FAILED and run.error == "RuntimeError: boom"
        assert not crud.is_completed(session, "hash1", "world")
    with db_session(db) as session:
        run = crud.start_stage(session, "hash1", "world")
        assert run.attempts == 2 and run.error is None


def test_runs_are_scoped_by_config_hash(db):
    with db_session(db) as session:
        for stage in ("corpus", "world"):
            crud.start_stage(session, "a", stage)
        crud.start_stage(session, "b", "corpus")
    with db_session(db) as session:
        assert [r.stage for r in crud.list_stage_runs(session, "a")] == ["corpus", "world"]
        assert len(crud.list_stage_runs(session, "b")) == 1
        assert crud.get_stage_run(session, "c", "corpus") is None


def test_updates_to_unknown_rows_are_ignored(db):
    with db_session(db) as session:
        crud.complete_stage(session, "nope", "corpus", {})
        crud.fail_stage(session, "nope", "corpus", "x")
        assert crud.list_stage_runs(session, "nope") == []


def test_session_rolls_back_on_error(db):
    with pytest.raises(RuntimeError):
        with db_session(db) as session:
            crud.start_stage(session, "hash2", "corpus")
            raise RuntimeError("abort")
    with db_session(db) as session:
        assert crud.get_stage_run(session, "hash2", "corpus") is None
