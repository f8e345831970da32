"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
exit-code contract without a lookup table: 1 usage, 2 data, 3 numeric.
"""

from __future__ import annotations


class SteerError(Exception):
    exit_code = 2


class UsageError(SteerError):
    exit_code = 1


class DataError(SteerError, ValueError):
    exit_code = 2


class NumericError(SteerError, ArithmeticError):
    exit_code = 3


# angle_codec
class InvalidConfig(DataError):
    pass


class AngleOutOfRange(DataError):
    pass


class InvalidDistribution(DataError):
    pass


class DegenerateWave(NumericError):
    pass


class PhaseOutOfRange(NumericError):
    pass


# signal_prep
class InvalidInput(DataError):
    pass


class InvalidCutoff(DataError):
    pass


class FrameOutsideLog(DataError):
    pass


class InvalidRate(DataError):
    pass


# metrics / dataset
class LengthMismatch(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class InvalidParams(DataError):
    pass


class NotEnoughSessions(DataError):
    pass


class RowCountMismatch(DataError):
    pass


class MalformedFile(DataError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"{message} (row {row})")
        self.row = row


# neural
class ShapeMismatch(DataError):
    pass


class DegenerateLoss(NumericError):
    pass


class InvalidEpsilon(DataError):
    pass


class CheckpointError(DataError):
    pass


# harness
class NonfiniteLoss(NumericError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class HeadCodecMismatch(DataError):
    pass
