"""Leave-one-subject-out experiment grid, metrics and report rendering."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import multiprocessing
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baseline
from .boutfeat import FEATURE_SETS, FeatureSet, assemble, timing_block
from .chewfeat import Standardizer, dataset_descriptors, fit_standardizer
from .codebook import DEFAULT_K_MAX, Codebook, select_k_aic
from .dataset import FOODS, Food, load_dataset
from .estimators import ESTIMATORS, FfnnConfig, Kind, child_seed, fit_estimator

log = logging.getLogger(__name__)

REGIMES = ("Apple", "Banana", "Rice", "Chips", "All")
BASELINE = "Amft"
MAPE_MIN_TRUTH_G = 0.1


def regime_food(regime):
    return None if regime == "All" else Food.parse(regime)


@dataclass
class ExperimentConfig:
    data: str | None = None
    feature_sets: list = field(default_factory=lambda: [f.value for f in FEATURE_SETS])
    estimators: list = field(default_factory=lambda: [k.value for k in ESTIMATORS])
    regimes: list = field(default_factory=lambda: list(REGIMES))
    include_baseline: bool = True
    baseline_selection: str = "stepwise"
    seed: int = 0
    k_max: int = DEFAULT_K_MAX
    ffnn_max_epochs: int = 1000
    out: str | None = None
    jobs: int = 1

    def __post_init__(self):
        self.feature_sets = [FeatureSet(f).value for f in self.feature_sets]
        self.estimators = [Kind(e).value for e in self.estimators]
        bad = [r for r in self.regimes if r not in REGIMES]
        if bad:
            raise ValueError(f"unknown regimes {bad}; choose from {list(REGIMES)}")
        if not (self.regimes and (self.include_baseline or (self.feature_sets and self.estimators))):
            raise ValueError("experiment selects nothing to run")
        # canonical order so reports do not depend on how the config was written
        self.feature_sets = [f.value for f in FEATURE_SETS if f.value in self.feature_sets]
        self.estimators = [k.value for k in ESTIMATORS if k.value in self.estimators]
        self.regimes = [r for r in REGIMES if r in self.regimes]
        baseline.Selection(self.baseline_selection)
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.k_max < 1 or self.jobs < 1 or self.ffnn_max_epochs < 0:
            raise ValueError("k_max and jobs must be >= 1, ffnn_max_epochs >= 0")

    @classmethod
    def from_json(cls, obj):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**obj)

    def to_json(self):
        out = dataclasses.asdict(self)
        # paths and parallelism do not affect results
        for key in ("data", "out", "jobs"):
            out.pop(key)
        return out


# -- metrics ----------------------------------------------------------------

def abs_errors(truth, pred):
    return np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64))


def ape(truth, pred):
    """Absolute percentage errors, skipping bouts lighter than 0.1 g."""
    truth = np.asarray(truth, dtype=np.float64)
    keep = truth >= MAPE_MIN_TRUTH_G
    return 100.0 * abs_errors(truth[keep], np.asarray(pred, dtype=np.float64)[keep]) / truth[keep]


def mae(truth, pred):
    if len(truth) == 0:
        raise ValueError("mae of an empty set")
    return float(np.mean(abs_errors(truth, pred)))


def mape(truth, pred):
    if len(truth) == 0:
        raise ValueError("mape of an empty set")
    if np.any(np.asarray(truth) <= 0):
        raise ValueError("mape needs positive ground truth")
    e = ape(truth, pred)
    if e.size == 0:
        raise ValueError("no bouts heavy enough for mape")
    return float(np.mean(e))


def _mean_std(v):
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        return None, None
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


# -- fold pipeline ----------------------------------------------------------

def _digest(arr):
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).hexdigest()


class Context:
    """Read-only inputs shared by every fold: dataset, descriptors, baseline features."""

    def __init__(self, ds, cfg, cache=None):
        self.ds = ds
        self.cfg = cfg
        # optional dict shared between runs on the same dataset; holds the
        # chew descriptors and per-fold standardisers/codebooks
        self.cache = cache
        self.refs = ds.bout_refs()
        self.by_key = {r.key: r for r in self.refs}
        self.subjects = ds.subjects
        needs_audio = any(FeatureSet(f).uses_audio for f in cfg.feature_sets) and cfg.estimators
        self.descriptors = {}
        if needs_audio:
            if cache is None:
                self.descriptors = dataset_descriptors(ds)
            else:
                self.descriptors = cache.setdefault("descriptors", None) or dataset_descriptors(ds)
                cache["descriptors"] = self.descriptors
        self.amft = ({r.key: baseline.amft_features(r.bout, r.recording) for r in self.refs}
                     if cfg.include_baseline else {})

    def split(self, subject, regime):
        food = regime_food(regime)
        chosen = [r for r in self.refs if food is None or r.bout.food is food]
        train = [r.key for r in chosen if r.recording.subject_id != subject]
        test = [r.key for r in chosen if r.recording.subject_id == subject]
        return train, test


@dataclass
class FoldInputs:
    """Everything fitted on a fold's training bouts before any estimator runs."""

    desc_scaler: Standardizer | None
    codebook: Codebook | None
    timing_scaler: Standardizer


def fit_fold_inputs(ctx, train_keys, regime, codebook_seed):
    if ctx.cache is None:
        return _fit_fold_inputs(ctx, train_keys, regime, codebook_seed)
    key = ("fold", regime, int(codebook_seed), ctx.cfg.k_max, bool(ctx.descriptors), tuple(train_keys))
    if key not in ctx.cache:
        ctx.cache[key] = _fit_fold_inputs(ctx, train_keys, regime, codebook_seed)
    return ctx.cache[key]


def _fit_fold_inputs(ctx, train_keys, regime, codebook_seed):
    all_foods = regime == "All"
    desc_scaler = codebook = None
    if ctx.descriptors:
        D = np.vstack([ctx.descriptors[k] for k in train_keys])
        desc_scaler = fit_standardizer(D)
        codebook = select_k_aic(desc_scaler.apply(D), ctx.cfg.k_max, codebook_seed)
    T = np.vstack([timing_block(ctx.by_key[k].bout, all_foods) for k in train_keys])
    timing_scaler = fit_standardizer(T) if T.shape[0] >= 2 else Standardizer.identity(T.shape[1])
    return FoldInputs(desc_scaler, codebook, timing_scaler)


def feature_matrix(ctx, keys, fs, inputs, regime):
    fs = FeatureSet(fs)
    rows = []
    for k in keys:
        desc = inputs.desc_scaler.apply(ctx.descriptors[k]) if fs.uses_audio else None
        rows.append(assemble(fs, ctx.by_key[k].bout, desc, inputs.codebook,
                             all_foods=regime == "All", timing_scaler=inputs.timing_scaler))
    return np.vstack(rows)


def _targets(ctx, keys):
    return np.array([ctx.by_key[k].bout.weight_g for k in keys], dtype=np.float64)


def fit_cell(ctx, train_keys, inputs, regime, fs, kind, seed):
    X = feature_matrix(ctx, train_keys, fs, inputs, regime)
    configs = {Kind.FFNN: FfnnConfig(max_epochs=ctx.cfg.ffnn_max_epochs)}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fit_estimator(kind, X, _targets(ctx, train_keys), seed=seed, configs=configs)


def fit_baseline(ctx, train_keys):
    X = np.vstack([ctx.amft[k] for k in train_keys])
    return baseline.amft_fit(X, _targets(ctx, train_keys), ctx.cfg.baseline_selection)


# seeds are keyed by (subject index, regime, ...) using the global regime order,
# so a cell's result does not depend on which other regimes are configured
def estimator_seed(master, f, regime, e, s):
    return child_seed(master, f, REGIMES.index(regime), 1, e, s)


def codebook_seed(master, f, regime):
    return child_seed(master, f, REGIMES.index(regime), 0)


def _hyper_summary(model):
    skip = {"val_mae_grid", "sigma_grid", "architectures", "train_loss"}
    return {k: v for k, v in sorted(model.hyper.items()) if k not in skip}


def run_fold(ctx, f, r):
    """Train and test every configured cell for held-out subject ``f`` in regime ``r``."""
    cfg = ctx.cfg
    subject = ctx.subjects[f]
    regime = cfg.regimes[r]
    train_keys, test_keys = ctx.split(subject, regime)
    if not train_keys or not test_keys:
        why = "no training bouts" if not train_keys else "no test bouts"
        return {"subject": subject, "regime": regime, "skipped": why}, {}
    truth = _targets(ctx, test_keys)
    results = {}
    meta = {"subject": subject, "regime": regime, "n_train": len(train_keys),
            "n_test": len(test_keys), "train_keys": train_keys, "hyper": {}, "seeds": {}}
    if cfg.estimators:
        inputs = fit_fold_inputs(ctx, train_keys, regime, codebook_seed(cfg.seed, f, regime))
        meta["timing_standardizer"] = inputs.timing_scaler.to_json()
        if inputs.codebook is not None:
            meta["descriptor_standardizer"] = inputs.desc_scaler.to_json()
            meta["codebook_seed"] = inputs.codebook.seed
            meta["k"] = inputs.codebook.k
            meta["aic_curve"] = list(inputs.codebook.aic_curve)
            meta["codebook_sha256"] = _digest(inputs.codebook.centroids)
        for s_idx, fs in enumerate(FEATURE_SETS):
            if fs.value not in cfg.feature_sets:
                continue
            Xte = feature_matrix(ctx, test_keys, fs, inputs, regime)
            for e_idx, kind in enumerate(ESTIMATORS):
                if kind.value not in cfg.estimators:
                    continue
                seed = estimator_seed(cfg.seed, f, regime, e_idx, s_idx)
                cell = f"{kind.value}/{fs.value}"
                try:
                    model = fit_cell(ctx, train_keys, inputs, regime, fs, kind, seed)
                except ValueError as exc:  # estimator precondition, e.g. too few bouts
                    meta.setdefault("skipped_cells", {})[cell] = str(exc)
                    continue
                meta["seeds"][cell] = seed
                meta["hyper"][cell] = _hyper_summary(model)
                results[(kind.value, fs.value)] = model.predict(Xte)
    if cfg.include_baseline:
        model = fit_baseline(ctx, train_keys)
        meta["baseline_selected"] = model.selected
        Xte = np.vstack([ctx.amft[k] for k in test_keys])
        results[(BASELINE, "")] = model.predict(Xte)
    return meta, {key: {"subject": subject, "bouts": test_keys, "truth": truth.tolist(),
                        "pred": [float(v) for v in pred]}
                  for key, pred in results.items()}


_WORKER_CTX = None


def _worker(task):
    return run_fold(_WORKER_CTX, *task)


def _run_tasks(ctx, tasks, jobs):
    global _WORKER_CTX
    if jobs <= 1:
        return [run_fold(ctx, f, r) for f, r in tasks]
    _WORKER_CTX = ctx
    try:
        mp = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=mp) as pool:
            return list(pool.map(_worker, tasks))
    finally:
        _WORKER_CTX = None


def row_keys(cfg):
    rows = [(k, f) for k in cfg.estimators for f in cfg.feature_sets]
    if cfg.include_baseline:
        rows.append((BASELINE, ""))
    return rows


def summarize_cell(folds):
    """Pooled per-bout and per-subject summaries of a cell's fold records."""
    truth = np.concatenate([f["truth"] for f in folds]) if folds else np.zeros(0)
    pred = np.concatenate([f["pred"] for f in folds]) if folds else np.zeros(0)
    ae = abs_errors(truth, pred)
    pe = ape(truth, pred)
    out = {"n_bouts": int(truth.size), "n_mape_excluded": int(truth.size - pe.size)}
    out["mae_mean"], out["mae_std"] = _mean_std(ae)
    out["mape_mean"], out["mape_std"] = _mean_std(pe)
    fold_mae = [mae(f["truth"], f["pred"]) for f in folds]
    fold_mape = [float(np.mean(ape(f["truth"], f["pred"]))) for f in folds
                 if ape(f["truth"], f["pred"]).size]
    out["subject_mae_mean"], out["subject_mae_std"] = _mean_std(fold_mae)
    out["subject_mape_mean"], out["subject_mape_std"] = _mean_std(fold_mape)
    return out


def loso_run(cfg, ds=None, cache=None):
    """Run the configured grid; returns the report as a JSON-ready dict.

    ``cache`` (a dict) may be shared between runs on the same dataset to
    reuse descriptors and fold codebooks; results are unaffected.
    """
    if ds is None:
        if cfg.data is None:
            raise ValueError("no dataset given")
        ds = load_dataset(cfg.data)
    if len(ds.subjects) < 2:
        raise ValueError("LOSO requires ≥ 2 subjects")
    ctx = Context(ds, cfg, cache)
    tasks = [(f, r) for f in range(len(ctx.subjects)) for r in range(len(cfg.regimes))]
    outputs = _run_tasks(ctx, tasks, cfg.jobs)

    fold_meta = []
    cells = {}
    for meta, recs in outputs:
        fold_meta.append(meta)
        if "skipped" in meta:
            log.warning("skipping %s/%s: %s", meta["subject"], meta["regime"], meta["skipped"])
        if meta.get("skipped_cells"):
            reasons = sorted(set(meta["skipped_cells"].values()))
            log.warning("%s/%s: skipped %d cells (%s)", meta["subject"], meta["regime"],
                        len(meta["skipped_cells"]), "; ".join(reasons))
        for (model, fs), rec in recs.items():
            cells.setdefault((model, fs, meta["regime"]), []).append(rec)
    grid = []
    for model, fs in row_keys(cfg):
        for regime in cfg.regimes:
            folds = cells.get((model, fs, regime), [])
            entry = {"model": model, "feature_set": fs, "regime": regime, "folds": folds}
            entry.update(summarize_cell(folds))
            grid.append(entry)
    return {
        "config": cfg.to_json(),
        "subjects": list(ctx.subjects),
        "aggregation": "pooled per-bout errors (subject_* fields: mean/std of per-subject means)",
        "standardization": "fit on LOSO training subjects only",
        "cells": grid,
        "folds": fold_meta,
    }


def report_json(report):
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


def meta_json(report):
    folds = []
    for m in report["folds"]:
        folds.append({k: v for k, v in m.items() if k not in ("train_keys", "aic_curve")})
    return json.dumps({"seed": report["config"]["seed"], "folds": folds},
                      sort_keys=True, indent=1) + "\n"


# -- leakage audit ----------------------------------------------------------

def verify_no_leakage(report, ds, deep=False):
    """Recompute each fold's fitted inputs from its logged training bouts.

    Returns a list of problems (empty when clean).  With ``deep`` the
    estimators are refitted as well and their chosen hyper-parameters compared.
    """
    cfg = ExperimentConfig(**report["config"])
    ctx = Context(ds, cfg)
    problems = []
    for meta in report["folds"]:
        if "skipped" in meta:
            continue
        subject, regime = meta["subject"], meta["regime"]
        f = ctx.subjects.index(subject)
        train = meta["train_keys"]
        tag = f"{subject}/{regime}"
        if any(ctx.by_key[k].recording.subject_id == subject for k in train):
            problems.append(f"{tag}: held-out subject present in training keys")
        expected_train, _ = ctx.split(subject, regime)
        if train != expected_train:
            problems.append(f"{tag}: training keys differ from the LOSO split")
        if not cfg.estimators:
            continue
        inputs = fit_fold_inputs(ctx, train, regime, codebook_seed(cfg.seed, f, regime))
        if inputs.timing_scaler.to_json() != meta["timing_standardizer"]:
            problems.append(f"{tag}: timing standardizer not reproducible from training bouts")
        if inputs.codebook is not None:
            if inputs.desc_scaler.to_json() != meta["descriptor_standardizer"]:
                problems.append(f"{tag}: descriptor standardizer not reproducible")
            if _digest(inputs.codebook.centroids) != meta["codebook_sha256"]:
                problems.append(f"{tag}: codebook not reproducible from training bouts")
        if cfg.include_baseline:
            sel = fit_baseline(ctx, train).selected
            if sel != meta["baseline_selected"]:
                problems.append(f"{tag}: baseline selection mask not reproducible")
        if deep:
            for s_idx, fs in enumerate(FEATURE_SETS):
                if fs.value not in cfg.feature_sets:
                    continue
                for e_idx, kind in enumerate(ESTIMATORS):
                    if kind.value not in cfg.estimators:
                        continue
                    cell = f"{kind.value}/{fs.value}"
                    if cell in meta.get("skipped_cells", {}):
                        continue
                    model = fit_cell(ctx, train, inputs, regime, fs, kind,
                                     estimator_seed(cfg.seed, f, regime, e_idx, s_idx))
                    if json.loads(json.dumps(_hyper_summary(model))) != meta["hyper"][cell]:
                        problems.append(f"{tag}: {cell} hyper-parameters not reproducible")
    return problems


# -- tables and plot --------------------------------------------------------

_FMT = {"mae": "{:.2f} ({:.2f})", "mape": "{:.1f} ({:.1f})"}


def table_rows(report, metric):
    """Rows of (label, feature set, {regime: (mean, std)}) in report order."""
    cfg = report["config"]
    cells = {(c["model"], c["feature_set"], c["regime"]): c for c in report["cells"]}
    rows = []
    seen = []
    for c in report["cells"]:
        key = (c["model"], c["feature_set"])
        if key not in seen:
            seen.append(key)
    for model, fs in seen:
        vals = {}
        for regime in cfg["regimes"]:
            c = cells[(model, fs, regime)]
            vals[regime] = (c[f"{metric}_mean"], c[f"{metric}_std"])
        rows.append((model, fs, vals))
    return rows


def column_minima(rows, regimes):
    best = {}
    for regime in regimes:
        vals = [(v[regime][0], i) for i, (_, _, v) in enumerate(rows) if v[regime][0] is not None]
        best[regime] = min(vals)[1] if vals else None
    return best


def render_table(report, metric):
    """Return (csv_text, txt_text) for ``metric`` in {"mae", "mape"}."""
    regimes = report["config"]["regimes"]
    rows = table_rows(report, metric)
    best = column_minima(rows, regimes)
    fmt = _FMT[metric]
    body = []
    for i, (model, fs, vals) in enumerate(rows):
        cells = []
        for regime in regimes:
            m, s = vals[regime]
            text = "n/a" if m is None else fmt.format(m, s)
            if best[regime] == i:
                text += "*"
            cells.append(text)
        body.append([model, fs, *cells])
    header = ["model", "feature_set", *regimes]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(body)
    return buf.getvalue(), _plain_table(header, body, metric)


def _plain_table(header, body, metric):
    unit = "g" if metric == "mae" else "%"
    widths = [max(len(str(r[i])) for r in [header, *body]) for i in range(len(header))]
    line = lambda r: "  ".join(str(v).ljust(widths[i]) for i, v in enumerate(r)).rstrip()
    title = (f"{'Mean absolute error' if metric == 'mae' else 'Mean absolute percentage error'}"
             f" ({unit}): mean (std); * = lowest in column")
    sep = "-" * len(line(header))
    return "\n".join([title, sep, line(header), sep, *map(line, body), sep]) + "\n"


def parse_table_csv(text):
    return list(csv.reader(io.StringIO(text)))


def table_csv_from_rows(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def render_plot(report, regime="All"):
    """Grouped bar chart (groups = feature sets, bars = estimators) as SVG text."""
    if regime not in report["config"]["regimes"]:
        raise ValueError(f"report has no results for regime {regime!r}")
    cells = {(c["model"], c["feature_set"]): c for c in report["cells"] if c["regime"] == regime}
    sets = report["config"]["feature_sets"]
    models = report["config"]["estimators"]
    if not sets or not models:
        raise ValueError("plot needs at least one estimator and feature set")
    values = {(m, s): cells[(m, s)]["mae_mean"] for m in models for s in sets}
    top = max([v for v in values.values() if v is not None] + [1e-9])
    colours = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"]
    W, H, left, bottom, right, top_pad = 640, 360, 60, 40, 120, 30
    plot_w, plot_h = W - left - right, H - bottom - top_pad
    group_w = plot_w / len(sets)
    bar_w = group_w * 0.8 / len(models)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<title>MAE per feature set and estimator ({regime})</title>',
           f'<line x1="{left}" y1="{H - bottom}" x2="{W - right}" y2="{H - bottom}" stroke="black"/>',
           f'<line x1="{left}" y1="{top_pad}" x2="{left}" y2="{H - bottom}" stroke="black"/>']
    for t in range(5):
        v = top * t / 4
        y = H - bottom - plot_h * t / 4
        out.append(f'<text x="{left - 6}" y="{y:.2f}" text-anchor="end">{v:.2f}</text>')
    out.append(f'<text x="14" y="{top_pad + plot_h / 2:.2f}" transform="rotate(-90 14 '
               f'{top_pad + plot_h / 2:.2f})" text-anchor="middle">MAE (g)</text>')
    for gi, s in enumerate(sets):
        gx = left + gi * group_w + group_w * 0.1
        for mi, m in enumerate(models):
            v = values[(m, s)]
            h = 0.0 if v is None else plot_h * v / top
            x = gx + mi * bar_w
            out.append(f'<rect class="bar" data-model="{m}" data-set="{s}" data-mae="{v!r}" '
                       f'x="{x:.2f}" y="{H - bottom - h:.2f}" width="{bar_w:.2f}" '
                       f'height="{h:.2f}" fill="{colours[mi % len(colours)]}"/>')
        out.append(f'<text x="{left + (gi + 0.5) * group_w:.2f}" y="{H - bottom + 16}" '
                   f'text-anchor="middle">{s}</text>')
    for mi, m in enumerate(models):
        y = top_pad + 10 + mi * 18
        out.append(f'<rect x="{W - right + 15}" y="{y - 9}" width="12" height="12" '
                   f'fill="{colours[mi % len(colours)]}"/>')
        out.append(f'<text x="{W - right + 32}" y="{y + 1}">{m}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


OUTPUT_FILES = ("report.json", "mae.csv", "mape.csv", "mae.txt", "mape.txt", "fig_all.svg", "meta.json")


def write_outputs(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_json(report))
    (out / "meta.json").write_text(meta_json(report))
    render_report_files(report, out)


def render_report_files(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for metric in ("mae", "mape"):
        csv_text, txt = render_table(report, metric)
        (out / f"{metric}.csv").write_text(csv_text)
        (out / f"{metric}.txt").write_text(txt)
    if "All" in report["config"]["regimes"] and report["config"]["estimators"] \
            and report["config"]["feature_sets"]:
        (out / "fig_all.svg").write_text(render_plot(report, "All"))
