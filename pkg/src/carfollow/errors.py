"""Typed errors raised across the package.

Every contract violation gets its own class so callers (and the CLI exit-code
mapping) can react precisely instead of string-matching messages.
"""

from __future__ import annotations


class CarFollowError(Exception):
    """Base class for all package errors."""


# ---- data loading ----


class EmptyFile(CarFollowError):
    """Trajectory file has no header row."""


class MissingColumn(CarFollowError):
    def __init__(self, column: str):
        super().__init__(f"required column missing from header: {column!r}")
        self.column = column


class MalformedRow(CarFollowError):
    def __init__(self, line_no: int, detail: str = ""):
        msg = f"unparseable row at line {line_no}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.line_no = line_no


class NonIntegerDecimation(CarFollowError):
    """Target dt is not an integer multiple of the source dt."""


# ---- kinematics ----


class ZeroEgoSpeed(CarFollowError):
    """Time headway is undefined at (near-)zero ego speed."""


# ---- datasets / regressor ----


class EmptyDataset(CarFollowError):
    """No rows where at least one is required."""


class TooFewSamples(CarFollowError):
    def __init__(self, n: int, minimum: int):
        super().__init__(f"got {n} samples, need at least {minimum}")
        self.n = n
        self.minimum = minimum


class IndexTooEarly(CarFollowError):
    """Feature window needs two steps of history before the index."""


class DimensionMismatch(CarFollowError):
    """Input vector length does not match the expected dimension."""


class LengthMismatch(CarFollowError):
    """Paired sequences differ in length."""


# ---- baselines ----


class NonPositiveGap(CarFollowError):
    """Bumper-to-bumper gap must be strictly positive."""


# ---- environment ----


class TraceTooShort(CarFollowError):
    """Episode too short to drive the environment."""


class StepAfterDone(CarFollowError):
    """step() called on a finished episode."""


# ---- agent ----


class BufferTooSmall(CarFollowError):
    def __init__(self, size: int, batch: int):
        super().__init__(f"replay holds {size} transitions, batch needs {batch}")
        self.size = size
        self.batch = batch


class EmptyPool(CarFollowError):
    """Training requires at least one trace."""


# ---- cli ----


class NoInput(CarFollowError):
    """Neither trajectory files nor a synthetic request were given."""


class EmptyStore(CarFollowError):
    """Episode store exists but holds no episodes."""


class MissingUpstream(CarFollowError):
    def __init__(self, stage: str):
        super().__init__(f"required upstream artifact missing: run {stage!r} first")
        self.stage = stage


class NothingToReport(CarFollowError):
    """No models, calibrations, or evaluations to aggregate."""
