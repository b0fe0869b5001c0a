from unittest.mock import MagicMock

import pytest
from google.cloud.exceptions import Forbidden, GoogleCloudError, NotFound

from app import settings
from app.storage import gcs


@pytest.fixture
def run_dir(tmp_path):
    root = tmp_path / "abc123"
    (root / "metrics").mkdir(parents=True)
    (root / "config.json").write_text("{}")
    (root / "metrics" / "privacy.csv").write_text("config_hash,privacy\n")
    return root


@pytest.fixture
def bucket(monkeypatch):
    bucket = MagicMock()
    bucket.name = "artifacts"
    bucket.exists.return_value = True
    client = MagicMock()
    client.bucket.return_value = bucket
    monkeypatch.setattr(gcs.storage, "Client", MagicMock(return_value=client))
    return bucket


def test_upload_copies_every_file(run_dir, bucket):
    uploaded = gcs.upload_run_artifacts(run_dir, bucket_name="artifacts", delay=0)
    assert uploaded == ["runs/abc123/config.json", "runs/abc123/metrics/privacy.csv"]
    content_types = [c.kwargs["content_type"] for c in bucket.blob.return_value.upload_from_filename.call_args_list]
    assert content_types == ["application/json", "text/csv"]


def test_transient_errors_are_retried(run_dir, bucket):
    bucket.blob.return_value.upload_from_filename.side_effect = [GoogleCloudError("flaky"), None, None]
    uploaded = gcs.upload_run_artifacts(run_dir, bucket_name="artifacts", delay=0)
    assert len(uploaded) == 2
    assert bucket.blob.return_value.upload_from_filename.call_count == 3


def test_retries_give_up(run_dir, bucket):
    bucket.blob.return_value.upload_from_filename.side_effect = GoogleCloudError("down")
    with pytest.raises(GoogleCloudError):
        gcs.upload_run_artifacts(run_dir, bucket_name="artifacts", max_attempts=2, delay=0)
    assert bucket.blob.return_value.upload_from_filename.call_count == 2


def test_permission_errors_are_not_retried(run_dir, bucket):
    bucket.blob.return_value.upload_from_filename.side_effect = Forbidden("no")
    with pytest.raises(Forbidden):
        gcs.upload_run_artifacts(run_dir, bucket_name="artifacts", delay=0)
    assert bucket.blob.return_value.upload_from_filename.call_count == 1


def test_missing_bucket(run_dir, bucket):
    bucket.exists.return_value = False
    with pytest.raises(NotFound):
        gcs.upload_run_artifacts(run_dir, bucket_name="artifacts")


def test_bucket_name_is_required(run_dir, monkeypatch):
    monkeypatch.setattr(settings, "ARTIFACTS_BUCKET_NAME", None)
    with pytest.raises(ValueError):
        gcs.upload_run_artifacts(run_dir)


def test_missing_run_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        gcs.upload_run_artifacts(tmp_path / "nowhere", bucket_name="artifacts")


def test_signed_url(bucket):
    bucket.blob.return_value.generate_signed_url.return_value = "https://signed"
    assert gcs.generate_signed_url("runs/abc123/config.json", bucket_name="artifacts") == "https://signed"
    assert bucket.blob.return_value.generate_signed_url.call_args.kwargs["version"] == "v4"
