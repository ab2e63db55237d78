import json
import subprocess
import sys

import numpy as np
import pytest

from biteweight import harness
from biteweight.cli import build_parser, main
from biteweight.dataset import load_dataset
from biteweight.pipeline import Pipeline

TINY = {"n_subjects": 2, "bouts_per_subject_per_food": 3, "seed": 4}


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "synth.json").write_text(json.dumps(TINY))
    assert main(["synth", "--config", str(root / "synth.json"), "--out", str(root / "data")]) == 0
    return root / "data"


def test_synth_deterministic(data_dir, tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(TINY))
    assert main(["synth", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "again")]) == 0
    assert tree(tmp_path / "again") == tree(data_dir)


def test_synth_seed_override(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(TINY))
    main(["synth", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "a"), "--seed", "5"])
    assert tree(tmp_path / "a") != {}
    cfg = dict(TINY, seed=5)
    (tmp_path / "d.json").write_text(json.dumps(cfg))
    main(["synth", "--config", str(tmp_path / "d.json"), "--out", str(tmp_path / "b")])
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_validate_ok(data_dir, capsys):
    assert main(["validate", "--data", str(data_dir)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_bad_weight(data_dir, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    for p in data_dir.iterdir():
        (bad / p.name).write_bytes(p.read_bytes())
    meta = json.loads((bad / "S01_rice.json").read_text())
    meta["bouts"][1]["weight_g"] = 0
    (bad / "S01_rice.json").write_text(json.dumps(meta))
    assert main(["validate", "--data", str(bad)]) == 1
    out = capsys.readouterr().out
    assert "S01_rice bout 1" in out and "non-positive weight" in out


def test_missing_directory_named(capsys):
    assert main(["validate", "--data", "/nonexistent/dir"]) == 2
    err = capsys.readouterr().err
    assert "--data" in err and "/nonexistent/dir" in err


def test_missing_config_named(data_dir, tmp_path, capsys):
    rc = main(["loso", "--data", str(data_dir), "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert rc == 2
    assert "--config" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["bogus"], ["validate"], ["validate", "--data", "x", "--frobnicate"],
    ["train", "--data", "x", "--estimator", "RF", "--set", "F1", "--out", "m.json"],
    ["synth", "--out", "x", "--seed", "-1"], ["synth", "--out", "x", "--seed", str(2 ** 64)],
    ["synth", "--out", "x", "--seed", "0x10"], [],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_max_seed_accepted():
    args = build_parser().parse_args(["synth", "--out", "x", "--seed", str(2 ** 64 - 1)])
    assert args.seed == 2 ** 64 - 1


def test_help_lists_flags(capsys):
    for cmd, flags in [("synth", ["--config", "--out", "--seed"]), ("validate", ["--data"]),
                       ("features", ["--data", "--set", "--out", "--regime", "--seed", "--k-max"]),
                       ("train", ["--data", "--estimator", "--set", "--regime", "--seed", "--out", "--k-max"]),
                       ("loso", ["--data", "--config", "--out", "--jobs", "--seed", "--k-max"]),
                       ("report", ["--in", "--out"])]:
        with pytest.raises(SystemExit):
            build_parser().parse_args([cmd, "--help"])
        out = capsys.readouterr().out
        assert all(f in out for f in flags)


def test_train_round_trip(data_dir, tmp_path):
    out = tmp_path / "model.json"
    assert main(["train", "--data", str(data_dir), "--estimator", "GRNN", "--set", "F4",
                 "--regime", "Apple", "--seed", "9", "--k-max", "4", "--out", str(out)]) == 0
    text = out.read_text()
    pipe = Pipeline.from_json(text)
    assert pipe.dumps() == text
    assert pipe.model.kind.value == "GRNN" and pipe.regime == "Apple"
    rec = next(r for r in load_dataset(data_dir).recordings if r.recording_id == "S01_apple")
    pred = pipe.predict_recording(rec)
    assert pred.shape == (3,) and np.all(np.isfinite(pred))
    # the stored exemplars are the training bouts, so GRNN stays inside their weight range
    assert np.all(pred >= min(pipe.model.y)) and np.all(pred <= max(pipe.model.y))


def test_train_idempotent(data_dir, tmp_path):
    for name in ("a.json", "b.json"):
        main(["train", "--data", str(data_dir), "--estimator", "LR", "--set", "F3", "--k-max", "4",
              "--out", str(tmp_path / name)])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_features_csv(data_dir, tmp_path):
    out = tmp_path / "f.csv"
    assert main(["features", "--data", str(data_dir), "--set", "F5", "--k-max", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 24
    header = lines[0].split(",")
    assert header[:2] == ["bout", "weight_g"] and header[2:7] == ["n_chews", "chew_dur_mean", "chew_dur_std",
                                                                   "rate_mean", "rate_std"]
    assert all(len(line.split(",")) == len(header) for line in lines)


@pytest.fixture(scope="module")
def loso_out(data_dir, tmp_path_factory):
    root = tmp_path_factory.mktemp("loso")
    (root / "exp.json").write_text(json.dumps({"ffnn_max_epochs": 5, "k_max": 4}))
    outs = {}
    for jobs in ("1", "3"):
        assert main(["loso", "--data", str(data_dir), "--config", str(root / "exp.json"),
                     "--out", str(root / f"out{jobs}"), "--jobs", jobs]) == 0
        outs[jobs] = root / f"out{jobs}"
    return outs


def test_loso_writes_all_files(loso_out):
    assert sorted(p.name for p in loso_out["1"].iterdir()) == sorted(harness.OUTPUT_FILES)
    rows = harness.parse_table_csv((loso_out["1"] / "mae.csv").read_text())
    assert len(rows) == 1 + 21 and len(rows[0]) == 2 + 5


def test_loso_jobs_independent(loso_out):
    assert tree(loso_out["1"]) == tree(loso_out["3"])


def test_loso_flag_overrides_config(data_dir, tmp_path):
    (tmp_path / "exp.json").write_text(json.dumps({"estimators": ["LR"], "feature_sets": ["F1"],
                                                   "regimes": ["All"], "seed": 1}))
    assert main(["loso", "--data", str(data_dir), "--config", str(tmp_path / "exp.json"),
                 "--out", str(tmp_path / "o"), "--seed", "77"]) == 0
    assert json.loads((tmp_path / "o" / "report.json").read_text())["config"]["seed"] == 77


def test_loso_bad_config_key(data_dir, tmp_path):
    (tmp_path / "exp.json").write_text(json.dumps({"estimator": ["LR"]}))
    assert main(["loso", "--data", str(data_dir), "--config", str(tmp_path / "exp.json"),
                 "--out", str(tmp_path / "o")]) == 2


def test_report_rerender(loso_out, tmp_path):
    assert main(["report", "--in", str(loso_out["1"] / "report.json"), "--out", str(tmp_path)]) == 0
    for name in ("mae.csv", "mape.csv", "mae.txt", "mape.txt", "fig_all.svg"):
        assert (tmp_path / name).read_bytes() == (loso_out["1"] / name).read_bytes()


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "biteweight.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("synth", "validate", "features", "train", "loso", "report"):
        assert cmd in r.stdout
