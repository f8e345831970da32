import subprocess
import sys

import numpy as np
import pytest

from sinesteer.cli import build_parser, main

TINY = ["--set", "hidden=8", "--set", "length=150", "--set", "sessions=3", "--set", "feature_dim=6",
        "--set", "distractor_dim=2", "--set", "w=5", "--set", "epochs=1"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_encode_default(capsys):
    code, out, _ = run(["codec-encode", "--angle", "0", "--n", "95", "--phi-max", "190"], capsys)
    values = out.strip().split(",")
    assert code == 0 and len(values) == 95 and float(values[0]) == 0.0


def test_encode_decode_round_trip(capsys):
    _, wave, _ = run(["codec-encode", "--angle", "42"], capsys)
    code, out, _ = run(["codec-decode", f"--wave={wave.strip()}"], capsys)
    assert code == 0 and out.strip() == "42.000000"


def test_decode_from_stdin():
    enc = subprocess.run([sys.executable, "-m", "sinesteer", "codec-encode", "--angle", "-17.5"],
                         capture_output=True, text=True, check=True)
    dec = subprocess.run([sys.executable, "-m", "sinesteer", "codec-decode"], input=enc.stdout,
                         capture_output=True, text=True)
    assert dec.returncode == 0 and abs(float(dec.stdout) + 17.5) < 1e-6


@pytest.mark.parametrize(
    "argv,code,name",
    [
        (["codec-encode", "--angle", "0", "--bogus", "1"], 1, "UsageError"),
        (["codec-encode"], 1, "UsageError"),
        ([], 1, "UsageError"),
        (["nope"], 1, "UsageError"),
        (["codec-encode", "--angle", "300"], 2, "AngleOutOfRange"),
        (["codec-decode", "--wave", "1,2,x"], 2, "InvalidInput"),
        (["codec-decode", "--wave", "0,0,0,0,0,0"], 3, "DegenerateWave"),
        (["codec-decode", "--wave", "0,1,0,-1,0", "--phi-max", "90", "--n", "6"], 2, "InvalidInput"),
        (["train", "--config", "/nonexistent.cfg"], 2, "MalformedFile"),
        (["train", "--set", "epochs=0"], 2, "InvalidParams"),
    ],
)
def test_exit_codes(argv, code, name, capsys):
    got, _, err = run(argv, capsys)
    assert got == code
    assert err.startswith(f"ERROR {code}: {name}")
    assert err.count("\n") == 1


def test_help_every_subcommand(capsys):
    parser = build_parser()
    subs = parser._subparsers._group_actions[0].choices
    assert set(subs) == {"synth", "prep", "codec-encode", "codec-decode", "train", "eval", "compare", "plot-data"}
    for name, sub in subs.items():
        code, out, _ = run([name, "--help"], capsys)
        assert code == 0
        for action in sub._actions:
            for flag in action.option_strings:
                assert flag in out
        for flag in ("--seed", "--config", "--out"):
            assert flag in out


def test_synth_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(["synth", *TINY, "--seed", "3", "--out", str(tmp_path / d)], capsys)[0] == 0
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert a == b and "features_s00.csv" in a and "labels_s02.csv" in a


def test_prep(tmp_path, capsys):
    t = np.arange(3000) / 100.0
    sensor = tmp_path / "sensor.csv"
    sensor.write_text("timestamp_s,angle_deg\n" + "".join(f"{float(x)!r},{float(np.sin(x))!r}\n" for x in t))
    frames = tmp_path / "frames.csv"
    frames.write_text("timestamp_s\n" + "".join(f"{k / 20!r}\n" for k in range(587)))
    code, _, _ = run(["prep", "--sensor", str(sensor), "--frames", str(frames), "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    lines = (tmp_path / "o" / "labels.csv").read_text().splitlines()
    assert lines[0] == "timestamp_s,angle_deg" and len(lines) - 1 == (587 - 1) // 10 + 1


def test_train_eval_plot_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        out = tmp_path / d
        assert run(["train", *TINY, "--seed", "1", "--out", str(out / "run")], capsys)[0] == 0
        ck = str(out / "run" / "checkpoint.json")
        assert run(["eval", "--checkpoint", ck, "--out", str(out / "eval")], capsys)[0] == 0
        assert run(["plot-data", *TINY, "--checkpoint", ck, "--out", str(out / "plot")], capsys)[0] == 0
    for sub in ("run", "eval", "plot"):
        assert files(tmp_path / "a" / sub) == files(tmp_path / "b" / sub)
    report = (tmp_path / "a" / "eval" / "report.csv").read_text()
    assert report.startswith("metric,value,unit\nrmse,")
    assert set(files(tmp_path / "a" / "plot")) == {"predictions.csv", "waveforms.csv"}


def test_compare_and_bars(tmp_path, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("\n".join(TINY[1::2]) + "\n")
    outs = []
    for d in ("a", "b"):
        code, _, _ = run(["compare", "--config", str(cfg), "--seeds", "2", "--out", str(tmp_path / d)], capsys)
        assert code == 0
        outs.append((tmp_path / d / "compare.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = outs[0].decode().splitlines()
    assert rows[0] == "head,model,rmse_deg,whiteness,clamp_count,config_hash" and len(rows) == 7
    code, _, _ = run(["plot-data", "--config", str(cfg), "--compare", str(tmp_path / "a" / "compare.csv"),
                      "--out", str(tmp_path / "plot")], capsys)
    assert code == 0
    assert len((tmp_path / "plot" / "bars.csv").read_text().splitlines()) == 13
