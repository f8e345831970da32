"""Steering evaluation metrics: angle RMSE and whiteness of a predicted series."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .errors import InvalidInput, LengthMismatch, SeriesTooShort


@dataclass(frozen=True)
class AngleSeries:
    """Uniformly sampled angle series in degrees, ``dt`` seconds apart."""

    values: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size < 1:
            raise InvalidInput("an angle series needs at least one value")
        if not self.dt > 0:
            raise InvalidInput(f"dt must be > 0, got {self.dt!r}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.values.size


SeriesLike = Union[AngleSeries, Iterable[float], np.ndarray]


def _values(series: SeriesLike) -> np.ndarray:
    if isinstance(series, AngleSeries):
        return series.values
    return np.asarray(series, dtype=np.float64).reshape(-1)


def rmse(ground: SeriesLike, predicted: SeriesLike) -> float:
    """Root mean squared angle error, in degrees."""
    g, p = _values(ground), _values(predicted)
    if g.size != p.size:
        raise LengthMismatch(f"ground has {g.size} values, predicted has {p.size}")
    if g.size == 0:
        raise InvalidInput("rmse of empty series")
    return float(np.sqrt(np.mean((g - p) ** 2)))


def whiteness(predicted: SeriesLike, dt: float | None = None, scheme: str = "central") -> float:
    """Mean squared time derivative of ``predicted`` (deg^2/s^2).

    ``scheme="central"`` uses central differences inside and one-sided
    differences at both ends, averaging over every sample. ``"forward"``
    averages the ``len - 1`` forward differences instead.
    """
    p = _values(predicted)
    if dt is None:
        dt = predicted.dt if isinstance(predicted, AngleSeries) else 1.0
    if not dt > 0:
        raise InvalidInput(f"dt must be > 0, got {dt!r}")
    if p.size < 3:
        raise SeriesTooShort(f"whiteness needs >= 3 samples, got {p.size}")
    if scheme == "central":
        d = np.gradient(p, dt)
    elif scheme == "forward":
        d = np.diff(p) / dt
    else:
        raise InvalidInput(f"unknown difference scheme {scheme!r}")
    return float(np.mean(d * d))


def write_report_csv(rows: Iterable[tuple[str, float, str]], path) -> None:
    """Write ``metric,value,unit`` rows."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "value", "unit"])
        for name, value, unit in rows:
            writer.writerow([name, repr(float(value)), unit])
