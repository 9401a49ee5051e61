"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class DriveWatchError(Exception):
    """Base class for all engine errors."""


# --- telemetry ---------------------------------------------------------


class UnknownChannel(DriveWatchError):
    pass


class MalformedRow(DriveWatchError):
    """CSV row failed to parse; carries the 1-based line number."""

    def __init__(self, path: str, line_no: int, reason: str) -> None:
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class SchemaMismatch(DriveWatchError):
    pass


class MalformedSession(DriveWatchError):
    pass


# --- features ----------------------------------------------------------


class TooFewSamples(DriveWatchError):
    pass


class InsufficientGaze(DriveWatchError):
    pass


class SessionShorterThanWindow(DriveWatchError):
    pass


# --- model -------------------------------------------------------------


class NonFiniteFeature(DriveWatchError):
    pass


class EmptyTrainingSet(DriveWatchError):
    pass


class TooFewPoints(DriveWatchError):
    pass


class EmptyBaseline(DriveWatchError):
    pass


class VersionMismatch(DriveWatchError):
    pass


class CorruptModel(DriveWatchError):
    pass


# --- alerts / service --------------------------------------------------


class ModelMissing(DriveWatchError):
    pass


class DegenerateDataWarning(UserWarning):
    """All training points identical; the two centroids coincide."""


class ConstantFeatureWarning(UserWarning):
    """A feature column had max == min during scaler fitting."""
