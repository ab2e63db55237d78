import dataclasses
import json
import re

import numpy as np
import pytest

from biteweight import harness
from biteweight.dataset import Dataset, SynthConfig, synth_generate
from biteweight.harness import ExperimentConfig, loso_run

FAST = dict(feature_sets=["F1", "F2", "F3"], estimators=["LR", "SVR", "GRNN"], k_max=4, seed=3)


def relabel(ds, weight_fn):
    recs = []
    for rec in ds.recordings:
        bouts = tuple(dataclasses.replace(b, weight_g=float(weight_fn(b))) for b in rec.bouts)
        recs.append(dataclasses.replace(rec, bouts=bouts))
    return Dataset(tuple(recs))


@pytest.fixture(scope="module")
def report(medium_ds):
    return loso_run(ExperimentConfig(**FAST), medium_ds)


# -- metrics ----------------------------------------------------------------

def test_metric_examples():
    assert harness.mae([2, 4], [1, 2]) == 1.5
    assert harness.mape([8], [10]) == 25.0
    assert harness.mae([3, 4], [3, 4]) == 0.0 and harness.mape([3, 4], [3, 4]) == 0.0


def test_metric_errors():
    with pytest.raises(ValueError):
        harness.mae([], [])
    with pytest.raises(ValueError):
        harness.mape([0.0, 1.0], [1.0, 1.0])


def test_ape_skips_tiny_truth():
    assert harness.ape([0.05, 2.0], [1.0, 3.0]).tolist() == [50.0]


# -- config -----------------------------------------------------------------

def test_config_canonical_order():
    cfg = ExperimentConfig(feature_sets=["F3", "F1"], estimators=["GRNN", "LR"], regimes=["All", "Apple"])
    assert cfg.feature_sets == ["F1", "F3"]
    assert cfg.estimators == ["LR", "GRNN"]
    assert cfg.regimes == ["Apple", "All"]


@pytest.mark.parametrize("kw", [
    {"regimes": ["Pizza"]}, {"feature_sets": ["F9"]}, {"estimators": ["RF"]},
    {"regimes": []}, {"seed": -1}, {"seed": 2 ** 64}, {"baseline_selection": "manual"},
    {"feature_sets": [], "include_baseline": False},
])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


def test_config_unknown_key():
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_json({"seeed": 1})


def test_config_json_round_trip():
    cfg = ExperimentConfig(**FAST)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


# -- LOSO -------------------------------------------------------------------

def test_two_subject_folds(small_ds):
    rep = loso_run(ExperimentConfig(feature_sets=["F1"], estimators=["LR"], regimes=["All"]), small_ds)
    folds = [m for m in rep["folds"] if m["regime"] == "All"]
    assert [m["subject"] for m in folds] == ["S01", "S02"]
    by_key = {r.key: r for r in small_ds.bout_refs()}
    for m in folds:
        assert all(by_key[k].recording.subject_id != m["subject"] for k in m["train_keys"])


def test_linear_oracle(medium_ds):
    ds = relabel(medium_ds, lambda b: 0.5 * b.n_chews)
    rep = loso_run(ExperimentConfig(feature_sets=["F1"], estimators=["LR"], regimes=["All"],
                                    include_baseline=False), ds)
    assert rep["cells"][0]["mae_mean"] < 1e-6


def test_each_bout_tested_once(report, medium_ds):
    for cell in report["cells"]:
        keys = [k for f in cell["folds"] for k in f["bouts"]]
        assert len(keys) == len(set(keys))
        food = harness.regime_food(cell["regime"])
        expected = {r.key for r in medium_ds.bout_refs() if food is None or r.bout.food is food}
        assert set(keys) == expected


def test_summary_matches_pairs(report):
    for cell in report["cells"]:
        t = np.concatenate([f["truth"] for f in cell["folds"]])
        p = np.concatenate([f["pred"] for f in cell["folds"]])
        e = np.abs(p - t)
        assert abs(cell["mae_mean"] - e.mean()) <= 1e-12
        assert abs(cell["mae_std"] - e.std(ddof=1)) <= 1e-12
        pe = 100 * e / t
        assert abs(cell["mape_mean"] - pe.mean()) <= 1e-12
        sub = [np.mean(np.abs(np.array(f["pred"]) - f["truth"])) for f in cell["folds"]]
        assert abs(cell["subject_mae_mean"] - np.mean(sub)) <= 1e-12


def test_fold_count(report, medium_ds):
    for regime in harness.REGIMES:
        assert sum(m["regime"] == regime for m in report["folds"]) == len(medium_ds.subjects)


def test_no_leakage(report, medium_ds):
    assert harness.verify_no_leakage(report, medium_ds, deep=True) == []


def test_leakage_detected(report, medium_ds):
    bad = json.loads(json.dumps(report))
    fold = bad["folds"][0]
    held_out = next(r.key for r in medium_ds.bout_refs() if r.recording.subject_id == fold["subject"])
    fold["train_keys"] = fold["train_keys"] + [held_out]
    problems = harness.verify_no_leakage(bad, medium_ds)
    assert any("held-out subject" in p for p in problems)


def test_leakage_detects_foreign_codebook(report, medium_ds):
    bad = json.loads(json.dumps(report))
    bad["folds"][1]["codebook_sha256"] = "0" * 64
    assert any("codebook" in p for p in harness.verify_no_leakage(bad, medium_ds))


def test_deterministic(report, medium_ds):
    again = loso_run(ExperimentConfig(**FAST), medium_ds)
    assert harness.report_json(again) == harness.report_json(report)


def test_cache_does_not_change_results(medium_ds):
    cfg = ExperimentConfig(feature_sets=["F2"], estimators=["GRNN"], regimes=["All"], k_max=4)
    plain = harness.report_json(loso_run(cfg, medium_ds))
    cache = {}
    assert harness.report_json(loso_run(cfg, medium_ds, cache)) == plain
    assert harness.report_json(loso_run(cfg, medium_ds, cache)) == plain


def test_cell_independent_of_other_cells(report, medium_ds):
    solo = loso_run(ExperimentConfig(feature_sets=["F2"], estimators=["GRNN"], regimes=["Rice"], k_max=4,
                                     seed=3, include_baseline=False), medium_ds)
    full = next(c for c in report["cells"] if (c["model"], c["feature_set"], c["regime"]) == ("GRNN", "F2", "Rice"))
    assert solo["cells"][0]["folds"] == full["folds"]


def test_regime_without_training_bouts_is_skipped(small_ds):
    # S02 has no banana recording -> the S01 banana fold has nothing to train on
    recs = tuple(r for r in small_ds.recordings if r.recording_id != "S02_banana")
    rep = loso_run(ExperimentConfig(feature_sets=["F1"], estimators=["LR"], regimes=["Banana"]),
                   Dataset(recs))
    skipped = [m for m in rep["folds"] if "skipped" in m]
    assert [(m["subject"], m["skipped"]) for m in skipped] == [("S01", "no training bouts"),
                                                               ("S02", "no test bouts")]


def test_metadata(report):
    for m in report["folds"]:
        assert m["k"] >= 1 and len(m["aic_curve"]) >= m["k"]
        assert set(m["hyper"]) == {f"{e}/{f}" for e in FAST["estimators"] for f in FAST["feature_sets"]}
        assert "SVR/F1" in m["seeds"]
    assert "training" in report["standardization"]


# -- tables and plot --------------------------------------------------------

def test_table_structure(report):
    csv_text, txt = harness.render_table(report, "mae")
    rows = harness.parse_table_csv(csv_text)
    assert rows[0] == ["model", "feature_set", *harness.REGIMES]
    assert len(rows) - 1 == 3 * 3 + 1
    assert rows[-1][0] == "Amft"
    assert sum(c.endswith("*") for r in rows[1:] for c in r) == 5
    assert txt.splitlines()[2].split() == rows[0]


def test_table_minimum_flag(report):
    rows = harness.parse_table_csv(harness.render_table(report, "mape")[0])
    for j, regime in enumerate(harness.REGIMES, start=2):
        vals = [c for c in report["cells"] if c["regime"] == regime]
        best = min(vals, key=lambda c: c["mape_mean"])
        flagged = [r for r in rows[1:] if r[j].endswith("*")]
        assert len(flagged) == 1
        assert (flagged[0][0], flagged[0][1]) == (best["model"], best["feature_set"])


def test_table_csv_round_trip(report):
    text = harness.render_table(report, "mae")[0]
    assert harness.table_csv_from_rows(harness.parse_table_csv(text)) == text


def test_plot(report):
    svg = harness.render_plot(report, "All")
    bars = re.findall(r'<rect class="bar" data-model="(\w+)" data-set="(\w+)" data-mae="([^"]+)" '
                      r'x="[^"]+" y="[^"]+" width="[^"]+" height="([^"]+)"', svg)
    assert len(bars) == 3 * 3
    cells = {(c["model"], c["feature_set"]): c["mae_mean"] for c in report["cells"] if c["regime"] == "All"}
    top = max(cells.values())
    for model, fs, value, height in bars:
        assert float(value) == cells[(model, fs)]
        assert float(height) == pytest.approx(290 * cells[(model, fs)] / top, abs=0.01)
    assert harness.render_plot(report, "All") == svg


def test_plot_missing_regime(small_ds):
    rep = loso_run(ExperimentConfig(feature_sets=["F1"], estimators=["LR"], regimes=["Rice"]), small_ds)
    with pytest.raises(ValueError, match="regime"):
        harness.render_plot(rep, "All")


def test_write_outputs(report, tmp_path):
    harness.write_outputs(report, tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == sorted(harness.OUTPUT_FILES)
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert json.loads((tmp_path / "report.json").read_text()) == json.loads(harness.report_json(report))
    assert all("k" in f for f in meta["folds"])
