import logging
import time
from datetime import timedelta
from pathlib import Path
from typing import List, Optional

from google.cloud import storage
from google.cloud.exceptions import Forbidden, GoogleCloudError, NotFound

from app import settings

logger = logging.getLogger(__name__)

CONTENT_TYPES = {
    ".csv": "text/csv",
    ".json": "application/json",
    ".jsonl": "application/x-ndjson",
    ".npz": "application/octet-stream",
    ".npy": "application/octet-stream",
}


def _bucket_name(bucket_name: Optional[str]) -> str:
    name = bucket_name or settings.ARTIFACTS_BUCKET_NAME
    if not name:
        logger.error("ARTIFACTS_BUCKET_NAME environment variable is not set.")
        raise ValueError("ARTIFACTS_BUCKET_NAME environment variable is not set.")
    return name


def _bucket(bucket_name: Optional[str]):
    name = _bucket_name(bucket_name)
    client = storage.Client()
    bucket = client.bucket(name)
    if not bucket.exists():
        logger.error("Bucket %s does not exist.", name)
        raise NotFound(f"Bucket '{name}' not found.")
    return bucket


def upload_file(bucket, local_path: Path, blob_name: str, max_attempts: int = 3, delay: float = 2.0) -> str:
    """Upload one file, retrying transient failures with a linear back-off."""
    attempt = 0
    while True:
        try:
            blob = bucket.blob(blob_name)
            blob.upload_from_filename(
                str(local_path), content_type=CONTENT_TYPES.get(local_path.suffix, "application/octet-stream")
            )
            return blob_name
        except (Forbidden, NotFound):
            raise
        except GoogleCloudError as e:
            attempt += 1
            logger.error("Attempt %s failed uploading %s: %s", attempt, blob_name, str(e), exc_info=True)
            if attempt >= max_attempts:
                raise
            time.sleep(delay * attempt)


def upload_run_artifacts(run_dir: str | Path, bucket_name: Optional[str] = None, prefix: str = "runs",
                         max_attempts: int = 3, delay: float = 2.0) -> List[str]:
    """
    Copy every file under `run_dir` to `<prefix>/<run_dir name>/...` in the
    artifacts bucket and return the blob names.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")
    try:
        bucket = _bucket(bucket_name)
        uploaded = []
        for path in sorted(p for p in run_dir.rglob("*") if p.is_file()):
            blob_name = f"{prefix}/{run_dir.name}/{path.relative_to(run_dir).as_posix()}"
            uploaded.append(upload_file(bucket, path, blob_name, max_attempts, delay))
        logger.info("Uploaded %d artifact files to gs://%s/%s/%s",
                    len(uploaded), bucket.name, prefix, run_dir.name)
        return uploaded
    except (NotFound, Forbidden, GoogleCloudError) as gcs_err:
        logger.error("Error while uploading artifacts to GCS: %s", str(gcs_err), exc_info=True)
        raise


def generate_signed_url(blob_name: str, expiration_seconds: int = 86400, bucket_name: Optional[str] = None) -> str:
    """
    Generate a version 4 signed URL for an uploaded artifact,
    valid for `expiration_seconds` (default 1 day).
    """
    try:
        bucket = _bucket(bucket_name)
        signed_url = bucket.blob(blob_name).generate_signed_url(
            expiration=timedelta(seconds=expiration_seconds),
            version="v4",
            method="GET",
        )
        logger.info("Signed URL generated successfully for blob: %s", blob_name)
        return signed_url
    except (NotFound, Forbidden, GoogleCloudError) as gcs_err:
        logger.error("Error while generating signed URL: %s", str(gcs_err), exc_info=True)
        raise
