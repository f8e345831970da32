"""Training data: synthetic driving sessions, CSV ingestion and sliding windows.

The synthetic generator stands in for a CNN feature extractor. A latent road
curvature follows a smoothed, bounded random walk; the steering angle is a
fixed scaling of it; features are noisy copies of the curvature padded with
pure-noise distractor channels. Observation noise is large compared to the
frame-to-frame change of the curvature, so pooling evidence over a window of
frames beats any single-frame estimate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .angle_codec import CodecConfig
from .errors import (
    AngleOutOfRange,
    InvalidParams,
    MalformedFile,
    NotEnoughSessions,
    RowCountMismatch,
    SeriesTooShort,
)
from .signal_prep import read_labels_csv

DEFAULT_FRAME_RATE = 2.0
DEFAULT_WINDOW = 10
CLIP_STDS = 3.0


@dataclass(frozen=True)
class FrameRecord:
    features: np.ndarray
    angle: float
    timestamp: float


@dataclass(frozen=True)
class FrameSeries:
    """One driving session stored column-wise.

    ``features`` is ``(n_frames, feature_dim)``. Iterating or indexing yields
    :class:`FrameRecord` views. Arrays are made read-only so windows can share
    them safely.
    """

    features: np.ndarray
    angles: np.ndarray
    timestamps: np.ndarray
    session_id: str = "session-0"

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        a = np.asarray(self.angles, dtype=np.float64).reshape(-1)
        t = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        if f.ndim != 2 or f.shape[0] != a.size or t.size != a.size:
            raise InvalidParams(
                f"inconsistent series shapes: features {f.shape}, angles {a.shape}, timestamps {t.shape}"
            )
        for arr in (f, a, t):
            arr.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "timestamps", t)

    def __len__(self) -> int:
        return self.angles.size

    def __getitem__(self, i: int) -> FrameRecord:
        return FrameRecord(self.features[i], float(self.angles[i]), float(self.timestamps[i]))

    def __iter__(self) -> Iterator[FrameRecord]:
        return (self[i] for i in range(len(self)))

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def dt(self) -> float:
        if len(self) < 2:
            return 1.0 / DEFAULT_FRAME_RATE
        return float(np.median(np.diff(self.timestamps)))

    def check_angles(self, codec: CodecConfig) -> None:
        bad = np.abs(self.angles) > codec.phi_max
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise AngleOutOfRange(f"{self.session_id}: frame {i} angle {self.angles[i]!r} exceeds +-{codec.phi_max}")


@dataclass(frozen=True)
class ScenarioParams:
    length: int = 2000
    feature_dim: int = 32
    observation_noise_sigma: float = 0.5
    curvature_smoothness: float = 0.95
    distractor_dim: int = 16
    seed: int = 7
    frame_rate: float = DEFAULT_FRAME_RATE

    def validate(self) -> None:
        if self.length < 1:
            raise InvalidParams(f"length must be >= 1, got {self.length}")
        if self.feature_dim < 1 or self.distractor_dim < 0:
            raise InvalidParams("feature_dim must be >= 1 and distractor_dim >= 0")
        if self.feature_dim <= self.distractor_dim:
            raise InvalidParams("feature_dim must exceed distractor_dim")
        if not 0 < self.curvature_smoothness < 1:
            raise InvalidParams("curvature_smoothness must lie in (0, 1)")
        if not self.observation_noise_sigma >= 0:
            raise InvalidParams("observation_noise_sigma must be >= 0")
        if not self.frame_rate > 0:
            raise InvalidParams("frame_rate must be > 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidParams("seed must be a 64-bit unsigned integer")


def curvature_clip(smoothness: float) -> float:
    """Clip level: CLIP_STDS stationary standard deviations of the unclipped walk."""
    return CLIP_STDS * (1.0 - smoothness) / math.sqrt(1.0 - smoothness**2)


def synth_scenario(
    params: ScenarioParams = ScenarioParams(),
    codec: CodecConfig = CodecConfig(),
    session_id: str | None = None,
) -> FrameSeries:
    """Generate one synthetic session; a pure function of ``params`` (seed included)."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    s = params.curvature_smoothness
    clip = curvature_clip(s)
    n = params.length

    eta = rng.standard_normal(n)
    curvature = np.empty(n)
    # Start in the stationary distribution so early frames look like late ones.
    prev = min(max(clip / CLIP_STDS * eta[0], -clip), clip)
    curvature[0] = prev
    for t in range(1, n):
        prev = min(max(s * prev + (1.0 - s) * eta[t], -clip), clip)
        curvature[t] = prev
    angles = np.clip(codec.phi_max * curvature / clip, -codec.phi_max, codec.phi_max)

    n_signal = params.feature_dim - params.distractor_dim
    features = np.empty((n, params.feature_dim))
    features[:, :n_signal] = curvature[:, None] + params.observation_noise_sigma * rng.standard_normal(
        (n, n_signal)
    )
    features[:, n_signal:] = rng.standard_normal((n, params.distractor_dim))
    timestamps = np.arange(n) / params.frame_rate
    return FrameSeries(features, angles, timestamps, session_id or f"synth-{params.seed}")


@dataclass(frozen=True)
class WindowedSample:
    window: np.ndarray  # (w, feature_dim), oldest first
    label: float
    frames: tuple  # (session_id, first_frame, last_frame_exclusive)


@dataclass(frozen=True)
class Windows:
    """All windows cut from one session.

    ``inputs`` is a read-only strided view ``(n, w, feature_dim)`` over the
    session's feature storage; no frame data is copied.
    """

    inputs: np.ndarray
    labels: np.ndarray
    starts: np.ndarray
    w: int
    session_id: str
    dt: float

    def __len__(self) -> int:
        return self.labels.size

    def __getitem__(self, k: int) -> WindowedSample:
        start = int(self.starts[k])
        return WindowedSample(self.inputs[k], float(self.labels[k]), (self.session_id, start, start + self.w))

    def __iter__(self) -> Iterator[WindowedSample]:
        return (self[k] for k in range(len(self)))

    def frame_ids(self) -> set[tuple[str, int]]:
        ids = set()
        for start in self.starts.tolist():
            ids.update((self.session_id, f) for f in range(start, start + self.w))
        return ids


def make_windows(series: FrameSeries, w: int = DEFAULT_WINDOW, stride: int = 1) -> Windows:
    """Many-to-one windows: sample k covers frames ``[k*stride, k*stride + w)`` and is labelled with its last frame."""
    if w < 1 or stride < 1:
        raise InvalidParams(f"window and stride must be >= 1, got w={w}, stride={stride}")
    if len(series) < w:
        raise SeriesTooShort(f"{series.session_id}: {len(series)} frames < window {w}")
    view = np.lib.stride_tricks.sliding_window_view(series.features, w, axis=0)  # (n, D, w)
    view = view.transpose(0, 2, 1)[::stride]
    starts = np.arange(0, len(series) - w + 1, stride)
    return Windows(
        inputs=view,
        labels=series.angles[starts + w - 1],
        starts=starts,
        w=w,
        session_id=series.session_id,
        dt=series.dt,
    )


def split_by_session(
    sessions: Sequence[FrameSeries], test_fraction: float
) -> tuple[list[FrameSeries], list[FrameSeries]]:
    """Hold out whole sessions, in order, until ``test_fraction`` of all frames is reached.

    A session is skipped when adding it would overshoot the target. If every
    session would overshoot, the first shortest one is held out. At least one
    session always stays in training.
    """
    sessions = list(sessions)
    if len(sessions) < 2:
        raise NotEnoughSessions(f"need >= 2 sessions to split, got {len(sessions)}")
    if not 0 < test_fraction < 1:
        raise InvalidParams(f"test_fraction must lie in (0, 1), got {test_fraction!r}")
    total = sum(len(s) for s in sessions)
    target = test_fraction * total
    slack = 1e-9 * total
    chosen: list[int] = []
    held = 0
    for i, s in enumerate(sessions):
        if held >= target - slack:
            break
        if held + len(s) <= target + slack:
            chosen.append(i)
            held += len(s)
    if not chosen:
        lengths = [len(s) for s in sessions]
        chosen = [lengths.index(min(lengths))]
    if len(chosen) == len(sessions):
        raise NotEnoughSessions("test split would consume every session")
    test = [sessions[i] for i in chosen]
    train = [s for i, s in enumerate(sessions) if i not in chosen]
    return train, test


def shared_frames(train: Sequence[Windows], test: Sequence[Windows]) -> set[tuple[str, int]]:
    """Frame identities ``(session_id, index)`` used by both train and test windows."""
    a: set = set().union(*(w.frame_ids() for w in train)) if train else set()
    b: set = set().union(*(w.frame_ids() for w in test)) if test else set()
    return a & b


def window_mean_features(windows: Windows) -> np.ndarray:
    return windows.inputs.mean(axis=1)


def _read_features_csv(path) -> np.ndarray:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise MalformedFile(f"{path}: missing header", row=1)
            expected = [f"f{i}" for i in range(len(header))]
            if [h.strip() for h in header] != expected:
                raise MalformedFile(f"{path}: header must be f0,f1,...,f{len(header) - 1}", row=1)
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


def load_labeled_series(
    features_path, labels_path, codec: CodecConfig | None = None, session_id: str | None = None
) -> FrameSeries:
    """Join a features CSV with a ``timestamp_s,angle_deg`` labels CSV row by row."""
    features = _read_features_csv(features_path)
    labels = read_labels_csv(labels_path)
    if len(features) != len(labels):
        raise RowCountMismatch(f"{features_path} has {len(features)} rows, {labels_path} has {len(labels)}")
    series = FrameSeries(features, labels.angles, labels.timestamps, session_id or Path(features_path).stem)
    if codec is not None:
        series.check_angles(codec)
    return series


def write_features_csv(series: FrameSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(series.feature_dim)])
        for row in series.features:
            writer.writerow([repr(float(v)) for v in row])


def session_params(base: ScenarioParams, seed: int, index: int, length: int) -> ScenarioParams:
    """Per-session scenario parameters with an independent seed derived from (base seed, run seed, index)."""
    derived = np.random.SeedSequence([base.seed, seed, index]).generate_state(2, dtype=np.uint32)
    return replace(base, length=length, seed=int(derived[0]) << 32 | int(derived[1]))
