"""Steering sensor log preprocessing.

Takes a high-rate, noisy steering-wheel log to per-frame ground truth:
low-pass filter, interpolate at camera frame times, then thin to the
training rate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FrameOutsideLog, InvalidCutoff, InvalidInput, InvalidRate, MalformedFile

SENSOR_HEADER = ("timestamp_s", "angle_deg")
CLOCK_HEADER = ("timestamp_s",)
DEFAULT_CUTOFF_HZ = 1.0


def _strictly_increasing(name: str, t: np.ndarray) -> None:
    if t.ndim != 1:
        raise InvalidInput(f"{name} timestamps must be 1-D")
    if not np.all(np.isfinite(t)):
        raise InvalidInput(f"{name} timestamps must be finite")
    if np.any(np.diff(t) <= 0):
        raise InvalidInput(f"{name} timestamps must be strictly increasing")


@dataclass(frozen=True)
class SensorLog:
    timestamps: np.ndarray
    angles: np.ndarray
    nominal_rate: float

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64)
        a = np.asarray(self.angles, dtype=np.float64)
        if t.shape != a.shape:
            raise InvalidInput("timestamps and angles differ in length")
        _strictly_increasing("sensor", t)
        if not self.nominal_rate > 0:
            raise InvalidInput(f"nominal_rate must be > 0, got {self.nominal_rate!r}")
        t.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "angles", a)

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class FrameClock:
    timestamps: np.ndarray
    rate: float

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64)
        _strictly_increasing("frame", t)
        if not self.rate > 0:
            raise InvalidInput(f"rate must be > 0, got {self.rate!r}")
        t.setflags(write=False)
        object.__setattr__(self, "timestamps", t)

    @classmethod
    def uniform(cls, start: float, n_frames: int, rate: float) -> "FrameClock":
        return cls(start + np.arange(n_frames) / rate, rate)


@dataclass(frozen=True)
class LabeledFrameSeries:
    timestamps: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64)
        a = np.asarray(self.angles, dtype=np.float64)
        if t.shape != a.shape:
            raise InvalidInput("timestamps and angles differ in length")
        _strictly_increasing("frame", t)
        t.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "angles", a)

    def __len__(self) -> int:
        return len(self.timestamps)

    def estimated_rate(self) -> float:
        if len(self) < 2:
            raise InvalidRate("cannot infer a frame rate from fewer than two frames")
        return 1.0 / float(np.median(np.diff(self.timestamps)))


def smoothing_factor(dt, cutoff: float):
    """alpha = dt / (dt + RC) with RC = 1/(2*pi*cutoff)."""
    rc = 1.0 / (2.0 * math.pi * cutoff)
    return dt / (dt + rc)


def lowpass(log: SensorLog, cutoff: float = DEFAULT_CUTOFF_HZ) -> SensorLog:
    """Causal single-pole IIR low-pass, ``y[t] = a*x[t] + (1-a)*y[t-1]``, ``y[0] = x[0]``.

    ``a`` is recomputed from each sample interval, so jittery logs are handled.
    """
    if len(log) == 0:
        raise InvalidInput("cannot filter an empty sensor log")
    nyquist = log.nominal_rate / 2.0
    if not (0 < cutoff < nyquist):
        raise InvalidCutoff(f"cutoff {cutoff!r} Hz must lie in (0, {nyquist}) Hz")
    x = log.angles
    alpha = smoothing_factor(np.diff(log.timestamps), cutoff)
    y = np.empty_like(x)
    y[0] = x[0]
    prev = x[0]
    for k in range(1, len(x)):
        prev = prev + alpha[k - 1] * (x[k] - prev)
        y[k] = prev
    return SensorLog(log.timestamps, y, log.nominal_rate)


def resample_to_frames(log: SensorLog, clock: FrameClock) -> LabeledFrameSeries:
    if len(log) == 0:
        raise InvalidInput("cannot resample an empty sensor log")
    t = clock.timestamps
    lo, hi = log.timestamps[0], log.timestamps[-1]
    outside = (t < lo) | (t > hi)
    if outside.any():
        first = int(np.flatnonzero(outside)[0])
        raise FrameOutsideLog(f"frame {first} at t={t[first]!r} s outside log span [{lo}, {hi}]")
    return LabeledFrameSeries(t.copy(), np.interp(t, log.timestamps, log.angles))


def downsample(
    series: LabeledFrameSeries, target_rate: float, source_rate: float | None = None
) -> LabeledFrameSeries:
    """Keep every k-th frame from frame 0, ``k = round(source_rate / target_rate)``.

    ``source_rate`` defaults to the median frame spacing of ``series``.
    """
    if not target_rate > 0:
        raise InvalidRate(f"target_rate must be > 0, got {target_rate!r}")
    if source_rate is None:
        source_rate = series.estimated_rate()
    if target_rate > source_rate * (1 + 1e-9):
        raise InvalidRate(f"target_rate {target_rate} Hz exceeds source rate {source_rate:.6g} Hz")
    k = max(1, int(round(source_rate / target_rate)))
    return LabeledFrameSeries(series.timestamps[::k].copy(), series.angles[::k].copy())


def _read_numeric_csv(path, header: tuple[str, ...]) -> np.ndarray:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            got = next(reader, None)
            if got is None or tuple(h.strip() for h in got) != header:
                raise MalformedFile(f"{path}: expected header {','.join(header)}", row=1)
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise MalformedFile(f"{path}: expected {len(header)} columns", row=lineno)
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    raise MalformedFile(f"{path}: non-numeric cell", row=lineno) from None
    except OSError as exc:
        raise MalformedFile(f"{path}: {exc.strerror or exc}") from None
    return np.asarray(rows, dtype=np.float64).reshape(-1, len(header))


def read_sensor_csv(path, nominal_rate: float | None = None) -> SensorLog:
    """Read a ``timestamp_s,angle_deg`` log; the rate is inferred when not given."""
    data = _read_numeric_csv(path, SENSOR_HEADER)
    if nominal_rate is None:
        if len(data) < 2:
            raise InvalidInput(f"{path}: need two samples to infer the sensor rate")
        nominal_rate = 1.0 / float(np.median(np.diff(data[:, 0])))
    return SensorLog(data[:, 0], data[:, 1], nominal_rate)


def read_frame_clock_csv(path, rate: float | None = None) -> FrameClock:
    data = _read_numeric_csv(path, CLOCK_HEADER)
    if rate is None:
        if len(data) < 2:
            raise InvalidInput(f"{path}: need two frames to infer the frame rate")
        rate = 1.0 / float(np.median(np.diff(data[:, 0])))
    return FrameClock(data[:, 0], rate)


def read_labels_csv(path) -> LabeledFrameSeries:
    data = _read_numeric_csv(path, SENSOR_HEADER)
    return LabeledFrameSeries(data[:, 0], data[:, 1])


def write_labels_csv(series: LabeledFrameSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SENSOR_HEADER)
        for t, a in zip(series.timestamps, series.angles):
            writer.writerow([repr(float(t)), repr(float(a))])
