"""Exception hierarchy shared by every stage.

Each error carries the process exit code the CLI reports for it.
"""
from __future__ import annotations

from typing import Any


class StgError(Exception):
    exit_code = 5
    stage = "internal"

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage

    def to_dict(self) -> dict[str, Any]:
        return {"error": str(self), "stage": self.stage, "exit_code": self.exit_code}


class ConfigError(StgError, ValueError):
    exit_code = 2
    stage = "config"


class InputError(StgError, ValueError):
    exit_code = 3
    stage = "input"


class IngestError(InputError):
    stage = "ingest"


class LevelMismatchError(InputError):
    stage = "align"


class CompressError(InputError):
    stage = "compress"


class SubgraphOverflowError(InputError):
    stage = "mine"


class EditBudgetExceeded(InputError):
    """Raised when the edit sampler runs out of retries; keeps the partial script."""

    stage = "synth"

    def __init__(self, message: str, partial: Any):
        super().__init__(message)
        self.partial = partial


class SolverError(StgError, RuntimeError):
    exit_code = 4
    stage = "repair"


class RepairUnsatisfiableError(SolverError):
    pass


class NoAdmissibleMove(StgError):
    stage = "centroid"


class InternalError(StgError, RuntimeError):
    exit_code = 5
