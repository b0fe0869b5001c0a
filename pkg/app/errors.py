"""
Exception hierarchy shared by every stage of the testbed.

*   Library code raises these; only `app.main` maps them to exit codes.
*   `ConfigError` → exit 2, `StageFailure` → exit 3.
"""

from __future__ import annotations

from typing import Optional


class TestbedError(Exception):
    """Root of all errors raised deliberately by the package."""

    __test__ = False  # keep pytest from collecting it


class ConfigError(TestbedError, ValueError):
    """Invalid, unknown or unsupported configuration."""


class DataFormatError(TestbedError, ValueError):
    """A corpus, trace or checkpoint file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class DegenerateInputError(TestbedError, ValueError):
    """Inputs violate a precondition (empty persona, zero std, non-normalized table, ...)."""


class TrainingDivergedError(TestbedError, RuntimeError):
    """Training produced non-finite values or tripped the divergence guard."""


class StageFailure(TestbedError, RuntimeError):
    """A pipeline stage aborted; partial artifacts stay on disk."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
