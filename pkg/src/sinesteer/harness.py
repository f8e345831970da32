"""Experiment orchestration: data, training, evaluation and head/model comparison tables."""

from __future__ import annotations

import copy
import csv
import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .angle_codec import CodecConfig
from .dataset import (
    FrameSeries,
    ScenarioParams,
    Windows,
    make_windows,
    session_params,
    shared_frames,
    split_by_session,
    synth_scenario,
)
from .errors import HeadCodecMismatch, InvalidParams, MalformedFile, NonfiniteLoss, SteerError
from .metrics import rmse, whiteness
from .neural import (
    HeadSpec,
    Model,
    ModelSpec,
    adam_step,
    clip_grad_norm,
    decode_outputs,
)
from .neural.checkpoint import checkpoint_dict, load_checkpoint, model_from_dict, save_checkpoint

log = logging.getLogger(__name__)

HEADS = ("regression", "nll_bins", "sine_wave")
MODELS = ("feedforward", "c_lstm")
COMPARE_HEADER = ("head", "model", "rmse_deg", "whiteness", "clamp_count", "config_hash")
HISTORY_HEADER = ("epoch", "train_loss", "val_rmse_deg")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run. Flat so it maps 1:1 onto a key=value file."""

    model: str = "c_lstm"
    head: str = "sine_wave"
    hidden: tuple[int, ...] = (64, 64)
    dropout: float = 0.0
    n_neurons: int = 95
    phi_max: float = 190.0
    smoothing_variance: float | None = 80.0
    length: int = 2000
    feature_dim: int = 32
    noise_sigma: float = 0.5
    smoothness: float = 0.95
    distractor_dim: int = 16
    scenario_seed: int = 7
    frame_rate: float = 2.0
    sessions: int = 5
    eval_sessions: int = 1
    w: int = 10
    stride: int = 1
    epochs: int = 100
    batch_size: int = 32
    lr_trunk: float = 1e-3
    lr_head: float = 1e-3
    lr_frontend: float = 1e-5
    clip_norm: float = 5.0
    patience: int = 0
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.w < 1 or self.stride < 1 or self.epochs < 1 or self.batch_size < 1:
            raise InvalidParams("w, stride, epochs and batch_size must all be >= 1")
        if self.sessions < 3 or not 1 <= self.eval_sessions <= self.sessions - 2:
            raise InvalidParams("need >= 3 sessions and 1 <= eval_sessions <= sessions - 2 (train + validation remain)")
        if self.length // self.sessions < max(self.w, 3):
            raise InvalidParams(f"{self.length} frames over {self.sessions} sessions leaves sessions shorter than w")
        if self.patience < 0:
            raise InvalidParams("patience must be >= 0 (0 disables early stopping)")
        # Constructing these validates them.
        self.model_spec
        self.scenario

    @property
    def codec(self) -> CodecConfig:
        return CodecConfig(self.n_neurons, self.phi_max)

    @property
    def scenario(self) -> ScenarioParams:
        p = ScenarioParams(
            length=self.length,
            feature_dim=self.feature_dim,
            observation_noise_sigma=self.noise_sigma,
            curvature_smoothness=self.smoothness,
            distractor_dim=self.distractor_dim,
            seed=self.scenario_seed,
            frame_rate=self.frame_rate,
        )
        p.validate()
        return p

    @property
    def model_spec(self) -> ModelSpec:
        return ModelSpec(
            kind=self.model,
            feature_dim=self.feature_dim,
            hidden_sizes=self.hidden,
            head=HeadSpec(self.head, self.codec, self.smoothing_variance),
            dropout_rate=self.dropout,
        )

    @property
    def lr_groups(self) -> dict[str, float]:
        return {"trunk": self.lr_trunk, "head": self.lr_head, "frontend": self.lr_frontend}

    def to_kv(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            lines.append(f"{f.name}={_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_kv().encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_kv(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        return cls.from_mapping(parse_kv(text, source))

    @classmethod
    def from_mapping(cls, values: dict[str, str], base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        base = base or cls()
        known = {f.name: f for f in fields(cls)}
        updates = {}
        for key, raw in values.items():
            if key not in known:
                raise InvalidParams(f"unknown config key {key!r}")
            updates[key] = _parse_value(key, raw, getattr(base, key))
        return replace(base, **updates)


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if key == "hidden":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if key == "smoothing_variance":
            return None if raw.lower() == "none" else float(raw)
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise InvalidParams(f"bad value {raw!r} for config key {key!r}") from None


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse flat ``key=value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedFile(f"{source}: expected key=value", row=lineno)
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedFile(f"{path}: {exc.strerror or exc}") from None
    return ExperimentConfig.from_kv(text, str(path))


# ---------------------------------------------------------------------------
# data


@dataclass
class DataSplit:
    train: list[FrameSeries]
    validation: FrameSeries
    test: list[FrameSeries]


def build_sessions(config: ExperimentConfig) -> list[FrameSeries]:
    """``config.sessions`` independent synthetic sessions sharing the ``config.length`` frame budget."""
    per_session = config.length // config.sessions
    out = []
    for k in range(config.sessions):
        params = session_params(config.scenario, config.seed, k, per_session)
        out.append(synth_scenario(params, config.codec, session_id=f"s{k:02d}"))
    return out


def split_data(config: ExperimentConfig, sessions: Sequence[FrameSeries] | None = None) -> DataSplit:
    sessions = list(sessions) if sessions is not None else build_sessions(config)
    pool, test = split_by_session(sessions, config.eval_sessions / len(sessions))
    if len(pool) < 2:
        raise InvalidParams("need at least one training and one validation session")
    return DataSplit(train=pool[:-1], validation=pool[-1], test=test)


def audit_no_leakage(split: DataSplit, w: int, stride: int = 1) -> None:
    """Raise if any frame feeds both a training window and a validation/test window."""
    train = [make_windows(s, w, stride) for s in split.train]
    held = [make_windows(s, w, 1) for s in split.test + [split.validation]]
    overlap = shared_frames(train, held)
    if overlap:
        raise InvalidParams(f"train/test leakage: {len(overlap)} shared frames, e.g. {sorted(overlap)[0]}")


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    model: Model
    checkpoint: dict
    history: list[tuple[int, float, float]]
    best_epoch: int
    adam_t: int


def _stack(windows: Iterable[Windows]) -> tuple[np.ndarray, np.ndarray]:
    windows = list(windows)
    X = np.concatenate([np.ascontiguousarray(w.inputs) for w in windows], axis=0)
    y = np.concatenate([w.labels for w in windows])
    return X, y


def _snapshot(model: Model):
    return [(p.value.copy(), p.adam_m.copy(), p.adam_v.copy()) for p in model.params]


def _restore(model: Model, snap) -> None:
    for p, (v, m, s) in zip(model.params, snap):
        p.value[...] = v
        p.adam_m[...] = m
        p.adam_v[...] = s


def predict_angles(model: Model, windows: Windows):
    return decode_outputs(model.spec.head, model.predict(windows.inputs))


def train(config: ExperimentConfig, split: DataSplit | None = None,
          on_epoch: Callable[[int, float, float], None] | None = None) -> TrainResult:
    """Train one (model, head) configuration and keep the best-validation parameters.

    Initialisation, batch order and dropout masks all come from one generator
    seeded with ``config.seed``, so a run is a pure function of its config.
    """
    split = split or split_data(config)
    audit_no_leakage(split, config.w, config.stride)
    X, y = _stack(make_windows(s, config.w, config.stride) for s in split.train)
    val = make_windows(split.validation, config.w, 1)

    rng = np.random.default_rng(config.seed)
    model = Model(config.model_spec, rng)
    if config.standardize:
        # Statistics come from training sessions only, so held-out frames never shape the model.
        model.set_input_standardization(np.concatenate([s.features for s in split.train]))
    lr_groups = config.lr_groups
    history: list[tuple[int, float, float]] = []
    best = (math.inf, 0, None, 0)  # (val rmse, epoch, snapshot, adam_t)
    t = 0
    n = len(y)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            model.zero_grad()
            out, cache = model.forward(X[idx], training=True, rng=rng)
            loss, d_out = model.loss(out, y[idx])
            if not math.isfinite(loss):
                raise NonfiniteLoss(epoch, float(loss))
            model.backward(cache, d_out)
            clip_grad_norm(model.params, config.clip_norm)
            t += 1
            adam_step(model.params, lr_groups, t)
            total += float(loss) * len(idx)
        train_loss = total / n
        val_pred, _, _ = predict_angles(model, val)
        val_rmse = rmse(val.labels, val_pred)
        if not math.isfinite(val_rmse):
            raise NonfiniteLoss(epoch, val_rmse)
        history.append((epoch, train_loss, val_rmse))
        if on_epoch:
            on_epoch(epoch, train_loss, val_rmse)
        if val_rmse < best[0]:
            best = (val_rmse, epoch, _snapshot(model), t)
        elif config.patience and epoch - best[1] >= config.patience:
            log.info("early stop at epoch %d (best %d)", epoch, best[1])
            break
    _restore(model, best[2])
    meta = {"config": config.to_kv(), "config_hash": config.config_hash, "best_epoch": best[1]}
    return TrainResult(model, checkpoint_dict(model, best[3], meta), history, best[1], best[3])


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class SessionReport:
    session_id: str
    frames: int
    rmse_deg: float
    whiteness: float
    clamp_count: int
    degenerate_count: int


@dataclass
class EvalReport:
    rmse_deg: float
    whiteness: float
    clamp_count: int
    degenerate_count: int
    sessions: list[SessionReport]
    config_hash: str = ""
    seconds: float = field(default=0.0, compare=False)
    predictions: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False, compare=False)

    def metric_rows(self) -> list[tuple[str, float, str]]:
        rows = [
            ("rmse", self.rmse_deg, "deg"),
            ("whiteness", self.whiteness, "deg^2/s^2"),
            ("clamp_count", self.clamp_count, "count"),
            ("degenerate_count", self.degenerate_count, "count"),
        ]
        for s in self.sessions:
            rows.append((f"rmse[{s.session_id}]", s.rmse_deg, "deg"))
            rows.append((f"whiteness[{s.session_id}]", s.whiteness, "deg^2/s^2"))
        return rows


def evaluate(
    model: Model,
    sessions: Sequence[FrameSeries],
    w: int,
    codec: CodecConfig | None = None,
    predict: Callable[[Windows], np.ndarray] | None = None,
    config_hash: str = "",
) -> EvalReport:
    """Score a model on whole sessions with stride-1 windows.

    ``predict`` overrides how head outputs are produced for a session's
    windows (used for oracle predictors in tests). Session metrics combine
    exactly into the totals: RMSE via frame-weighted mean squared error and
    whiteness via frame-weighted mean.
    """
    head = model.spec.head
    if codec is not None and codec != head.codec:
        raise HeadCodecMismatch(f"checkpoint codec {head.codec} != supplied {codec}")
    started = time.perf_counter()
    per: list[SessionReport] = []
    predictions = {}
    for series in sessions:
        windows = make_windows(series, w, 1)
        outputs = predict(windows) if predict else model.predict(windows.inputs)
        angles, clamps, degenerate = decode_outputs(head, outputs)
        per.append(
            SessionReport(
                series.session_id,
                len(angles),
                rmse(windows.labels, angles),
                whiteness(angles, windows.dt),
                clamps,
                degenerate,
            )
        )
        predictions[series.session_id] = (windows.labels.copy(), angles)
    frames = sum(s.frames for s in per)
    return EvalReport(
        rmse_deg=math.sqrt(sum(s.frames * s.rmse_deg**2 for s in per) / frames),
        whiteness=sum(s.frames * s.whiteness for s in per) / frames,
        clamp_count=sum(s.clamp_count for s in per),
        degenerate_count=sum(s.degenerate_count for s in per),
        sessions=per,
        config_hash=config_hash,
        seconds=time.perf_counter() - started,
        predictions=predictions,
    )


def evaluate_checkpoint(checkpoint, config: ExperimentConfig, sessions: Sequence[FrameSeries] | None = None):
    """Evaluate a checkpoint (path or dict) on ``config``'s test sessions, or on ``sessions``."""
    if isinstance(checkpoint, dict):
        model, _, meta = model_from_dict(checkpoint)
    else:
        model, _, meta = load_checkpoint(checkpoint)
    if sessions is None:
        sessions = split_data(config).test
    return evaluate(model, sessions, config.w, config.codec, config_hash=meta.get("config_hash", ""))


def write_history_csv(history, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_HEADER)
        for epoch, loss, val in history:
            writer.writerow([epoch, repr(float(loss)), repr(float(val))])


# ---------------------------------------------------------------------------
# comparison


@dataclass
class CellResult:
    head: str
    model: str
    rmse_deg: float
    whiteness: float
    clamp_count: int
    config_hash: str
    per_seed: list[tuple[int, float, float]] = field(default_factory=list)
    error: str = ""

    def row(self) -> list[str]:
        if self.error:
            return [self.head, self.model, "nan", "nan", "", self.config_hash]
        return [self.head, self.model, repr(self.rmse_deg), repr(self.whiteness), str(self.clamp_count),
                self.config_hash]


def default_grid(base: ExperimentConfig = ExperimentConfig()) -> list[ExperimentConfig]:
    """The 3 heads x 2 models grid, rows in table order."""
    return [replace(base, head=h, model=m) for h in HEADS for m in MODELS]


def run_seed(config: ExperimentConfig, cache_dir: str | None = None) -> tuple[float, float, int]:
    """Train (or reuse a cached checkpoint) and evaluate one config; returns (rmse, whiteness, clamps)."""
    split = split_data(config)
    ckpt_path = Path(cache_dir) / f"{config.config_hash}.json" if cache_dir else None
    if ckpt_path is not None and ckpt_path.exists():
        model, _, _ = load_checkpoint(ckpt_path)
    else:
        result = train(config, split)
        model = result.model
        if ckpt_path is not None:
            ckpt_path.parent.mkdir(parents=True, exist_ok=True)
            save_checkpoint(model, ckpt_path, result.adam_t, result.checkpoint["meta"])
    report = evaluate(model, split.test, config.w, config.codec, config_hash=config.config_hash)
    return report.rmse_deg, report.whiteness, report.clamp_count


def _run_seed_safe(args):
    config, cache_dir = args
    try:
        return run_seed(config, cache_dir), ""
    except SteerError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def compare(
    configs: Sequence[ExperimentConfig],
    seeds: Sequence[int] | None = None,
    cache_dir: str | None = None,
    jobs: int = 1,
) -> list[CellResult]:
    """Train and evaluate every config for every seed; cells report medians over seeds.

    A failing run marks its cell with the error instead of aborting the table.
    """
    jobs_list = []
    for cfg in configs:
        for s in seeds if seeds is not None else [cfg.seed]:
            jobs_list.append((replace(cfg, seed=s), cache_dir))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_seed_safe, jobs_list))
    else:
        outcomes = [_run_seed_safe(j) for j in jobs_list]

    cells = []
    k = 0
    for cfg in configs:
        n_seeds = len(seeds) if seeds is not None else 1
        chunk = outcomes[k:k + n_seeds]
        used = jobs_list[k:k + n_seeds]
        k += n_seeds
        errors = [err for res, err in chunk if err]
        if errors:
            cells.append(CellResult(cfg.head, cfg.model, math.nan, math.nan, 0, cfg.config_hash, error=errors[0]))
            continue
        per_seed = [(c.seed, res[0], res[1]) for (c, _), (res, _) in zip(used, chunk)]
        cells.append(
            CellResult(
                head=cfg.head,
                model=cfg.model,
                rmse_deg=float(np.median([r[1] for r in per_seed])),
                whiteness=float(np.median([r[2] for r in per_seed])),
                clamp_count=sum(res[2] for res, _ in chunk),
                config_hash=cfg.config_hash,
                per_seed=per_seed,
            )
        )
    return cells


def write_compare_csv(cells: Sequence[CellResult], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARE_HEADER)
        for cell in cells:
            writer.writerow(cell.row())


def read_compare_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COMPARE_HEADER:
            raise MalformedFile(f"{path}: expected header {','.join(COMPARE_HEADER)}", row=1)
        return list(reader)


def clone_model(model: Model) -> Model:
    return copy.deepcopy(model)
