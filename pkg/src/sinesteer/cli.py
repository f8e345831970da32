"""Command-line entry point: ``sinesteer <subcommand> [--flag value ...]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Errors are printed to stderr as a single line starting with ``ERROR <code>:``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .angle_codec import CodecConfig, decode, encode
from .dataset import write_features_csv
from .errors import DataError, InvalidInput, SteerError, UsageError
from .harness import (
    ExperimentConfig,
    build_sessions,
    compare,
    default_grid,
    evaluate,
    load_config,
    read_compare_csv,
    split_data,
    train,
    write_compare_csv,
    write_history_csv,
)
from .metrics import write_report_csv
from .neural.checkpoint import load_checkpoint, save_checkpoint
from .signal_prep import (
    LabeledFrameSeries,
    downsample,
    lowpass,
    read_frame_clock_csv,
    read_sensor_csv,
    resample_to_frames,
    write_labels_csv,
)

log = logging.getLogger("sinesteer")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors map to exit code 1."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the run seed (default: from config, else 0)")
    p.add_argument("--config", default=None, help="key=value experiment config file")
    p.add_argument("--out", default=None, help=out_help)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.set:
        kv = cfg.to_kv() + "\n" + "\n".join(args.set)
        cfg = ExperimentConfig.from_kv(kv, "--set")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidInput(f"cannot create output directory {out}: {exc.strerror or exc}") from None
    return out


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _codec(args) -> CodecConfig:
    return CodecConfig(args.n, args.phi_max)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> None:
    cfg = _config(args)
    out = _out_dir(args, "synth")
    for series in build_sessions(cfg):
        write_features_csv(series, out / f"features_{series.session_id}.csv")
        write_labels_csv(
            LabeledFrameSeries(series.timestamps, series.angles), out / f"labels_{series.session_id}.csv"
        )
    (out / "config.cfg").write_text(cfg.to_kv(), encoding="utf-8")
    print(f"wrote {cfg.sessions} sessions to {out}")


def cmd_prep(args) -> None:
    sensor = read_sensor_csv(args.sensor, args.sensor_rate)
    clock = read_frame_clock_csv(args.frames)
    series = downsample(resample_to_frames(lowpass(sensor, args.cutoff), clock), args.target_rate)
    out = _out_dir(args, "prep")
    write_labels_csv(series, out / "labels.csv")
    print(f"wrote {len(series)} labels to {out / 'labels.csv'}")


def cmd_codec_encode(args) -> None:
    wave = encode(args.angle, _codec(args))
    text = ",".join(format(float(v), ".17g") for v in wave)
    if args.out:
        (_out_dir(args, ".") / "wave.csv").write_text(text + "\n", encoding="utf-8")
    print(text)


def _parse_wave(text: str) -> np.ndarray:
    parts = [p for p in text.replace("\n", ",").split(",") if p.strip()]
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise InvalidInput(f"wave must be comma-separated numbers: {exc}") from None


def cmd_codec_decode(args) -> None:
    wave = _parse_wave(args.wave if args.wave is not None else sys.stdin.read())
    n = args.n if args.n is not None else wave.size
    if wave.size != n:
        raise InvalidInput(f"wave has {wave.size} values, expected {n}")
    result = decode(wave, CodecConfig(n, args.phi_max))
    text = f"{result.angle:.6f}"
    if args.out:
        (_out_dir(args, ".") / "angle.txt").write_text(text + "\n", encoding="utf-8")
    print(text)


def cmd_train(args) -> None:
    cfg = _config(args)
    out = _out_dir(args, "run")

    def progress(epoch, loss, val):
        log.info("epoch %d train_loss %.6g val_rmse %.4f", epoch, loss, val)

    result = train(cfg, on_epoch=progress)
    save_checkpoint(result.model, out / "checkpoint.json", result.adam_t, result.checkpoint["meta"])
    write_history_csv(result.history, out / "history.csv")
    (out / "config.cfg").write_text(cfg.to_kv(), encoding="utf-8")
    print(f"best epoch {result.best_epoch}, val RMSE {result.history[result.best_epoch - 1][2]:.4f} deg")


def _checkpoint_config(args, meta) -> ExperimentConfig:
    if args.config or "config" not in meta:
        return _config(args)
    cfg = ExperimentConfig.from_kv(meta["config"], "checkpoint")
    if args.set:
        cfg = ExperimentConfig.from_kv(cfg.to_kv() + "\n" + "\n".join(args.set), "--set")
    return replace(cfg, seed=args.seed) if args.seed is not None else cfg


def _write_predictions(path: Path, report) -> None:
    rows = []
    for session_id, (truth, pred) in report.predictions.items():
        rows.extend((session_id, k, repr(float(t)), repr(float(p))) for k, (t, p) in enumerate(zip(truth, pred)))
    _write_rows(path, ("session", "window", "true_deg", "pred_deg"), rows)


def cmd_eval(args) -> None:
    model, _, meta = load_checkpoint(args.checkpoint)
    cfg = _checkpoint_config(args, meta)
    report = evaluate(model, split_data(cfg).test, cfg.w, cfg.codec, config_hash=meta.get("config_hash", ""))
    out = _out_dir(args, "eval")
    write_report_csv(report.metric_rows(), out / "report.csv")
    _write_predictions(out / "predictions.csv", report)
    log.info("evaluated in %.2f s", report.seconds)
    print(f"RMSE {report.rmse_deg:.4f} deg, whiteness {report.whiteness:.4f} deg^2/s^2, clamps {report.clamp_count}")


def cmd_compare(args) -> None:
    cfg = _config(args)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    seeds = [cfg.seed + k for k in range(args.seeds)]
    cells = compare(default_grid(cfg), seeds=seeds, cache_dir=args.cache, jobs=args.jobs)
    out = _out_dir(args, "compare")
    write_compare_csv(cells, out / "compare.csv")
    for c in cells:
        status = f"ERROR {c.error}" if c.error else f"rmse {c.rmse_deg:.3f} whiteness {c.whiteness:.3f}"
        print(f"{c.head:>10} {c.model:>11}  {status}")


def cmd_plot_data(args) -> None:
    cfg = _config(args)
    out = _out_dir(args, "plot")
    codec = cfg.codec

    angles = [float(a) for a in args.angles.split(",")] if args.angles else [-codec.phi_max, -90.0, 0.0, 90.0,
                                                                                codec.phi_max]
    rows = []
    for a in angles:
        wave = encode(a, codec)
        rows.extend((repr(a), i + 1, repr(float(v))) for i, v in enumerate(wave))
    _write_rows(out / "waveforms.csv", ("angle_deg", "neuron", "activation"), rows)

    if args.checkpoint:
        model, _, meta = load_checkpoint(args.checkpoint)
        cfg = _checkpoint_config(args, meta)
        config_hash = meta.get("config_hash", "")
    else:
        result = train(cfg)
        model, config_hash = result.model, cfg.config_hash
    report = evaluate(model, split_data(cfg).test, cfg.w, cfg.codec, config_hash=config_hash)
    _write_predictions(out / "predictions.csv", report)

    if args.compare:
        bars = []
        for row in read_compare_csv(args.compare):
            bars.append((row["head"], row["model"], "rmse_deg", row["rmse_deg"]))
            bars.append((row["head"], row["model"], "whiteness", row["whiteness"]))
        _write_rows(out / "bars.csv", ("head", "model", "metric", "value"), bars)
    print(f"wrote plot data to {out}")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sinesteer", description="Steering-angle regression with phase-encoded sine-wave outputs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("synth", help="write synthetic sessions as feature/label CSVs")
    _common(p, "output directory (default: synth)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prep", help="low-pass, resample and downsample a steering sensor log")
    _common(p, "output directory (default: prep)")
    p.add_argument("--sensor", required=True, help="sensor CSV with header timestamp_s,angle_deg")
    p.add_argument("--frames", required=True, help="frame clock CSV with header timestamp_s")
    p.add_argument("--sensor-rate", type=float, default=None, help="nominal sensor rate in Hz (default: estimated)")
    p.add_argument("--cutoff", type=float, default=1.0, help="low-pass cutoff in Hz (default: 1.0)")
    p.add_argument("--target-rate", type=float, default=2.0, help="output label rate in Hz (default: 2.0)")
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("codec-encode", help="print the sine-wave encoding of an angle")
    _common(p, "also write wave.csv into this directory")
    p.add_argument("--angle", type=float, required=True, help="steering angle in degrees")
    p.add_argument("--n", type=int, default=95, help="number of output neurons (default: 95)")
    p.add_argument("--phi-max", type=float, default=190.0, help="maximum angle in degrees (default: 190)")
    p.set_defaults(func=cmd_codec_encode)

    p = sub.add_parser("codec-decode", help="decode a comma-separated wave (from --wave or stdin) to an angle")
    _common(p, "also write angle.txt into this directory")
    p.add_argument("--wave", default=None, help="comma-separated activations; write --wave=... when the first value is negative (default: read stdin)")
    p.add_argument("--n", type=int, default=None, help="expected number of values (default: length of the wave)")
    p.add_argument("--phi-max", type=float, default=190.0, help="maximum angle in degrees (default: 190)")
    p.set_defaults(func=cmd_codec_decode)

    p = sub.add_parser("train", help="train one configuration, write checkpoint.json and history.csv")
    _common(p, "output directory (default: run)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on held-out sessions")
    _common(p, "output directory (default: eval)")
    p.add_argument("--checkpoint", required=True, help="checkpoint.json written by train")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="train and evaluate all head x model combinations")
    _common(p, "output directory (default: compare)")
    p.add_argument("--seeds", type=int, default=3, help="number of seeds per cell, starting at --seed (default: 3)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default: 1)")
    p.add_argument("--cache", default=None, help="directory for reusing checkpoints by config hash")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot-data", help="write CSVs for waveform, prediction and comparison plots")
    _common(p, "output directory (default: plot)")
    p.add_argument("--checkpoint", default=None, help="checkpoint to plot predictions for (default: train one)")
    p.add_argument("--compare", default=None, help="compare.csv to reshape into bars.csv")
    p.add_argument("--angles", default=None, help="comma-separated angles for waveforms.csv")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (see --help)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        args.func(args)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except SteerError as exc:
        print(f"ERROR {exc.exit_code}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ERROR {DataError.exit_code}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
