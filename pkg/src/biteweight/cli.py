"""biteweight command line: synth, validate, features, train, loso, report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .boutfeat import FEATURE_SETS, feature_names, write_feature_csv
from .chewfeat import DIM
from .codebook import DEFAULT_K_MAX
from .dataset import (Dataset, DatasetError, SynthConfig, load_dataset, load_recording, synth_generate,
                      validate, write_dataset)
from .estimators import ESTIMATORS

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def seed_arg(text):
    try:
        v = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a decimal integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed out of unsigned 64-bit range: {text}")
    return v


def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return v


def _existing(path, flag, kind="file"):
    p = Path(path)
    ok = p.is_dir() if kind == "directory" else (p.exists() and not p.is_dir())
    if not ok:
        raise UsageError(f"{flag}: no such {kind}: {path}")
    return p


def _read_json(path, flag):
    p = _existing(path, flag)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{flag}: {path} is not valid JSON ({exc})") from None


def _load(args):
    return load_dataset(_existing(args.data, "--data", "directory"))


def cmd_synth(args):
    obj = _read_json(args.config, "--config") if args.config else {}
    if args.seed is not None:
        obj["seed"] = args.seed
    try:
        cfg = SynthConfig.from_json(obj)
    except TypeError as exc:
        raise UsageError(f"--config: {exc}") from None
    write_dataset(synth_generate(cfg), args.out)
    return EXIT_OK


def cmd_validate(args):
    data = _existing(args.data, "--data", "directory")
    recs, issues = [], []
    for path in sorted(data.glob("*.json")):
        try:
            recs.append(load_recording(path))
        except DatasetError as exc:
            issues.append(str(exc))
    if not recs and not issues:
        issues.append(f"{data}: no annotation files found")
    ds = Dataset(tuple(recs))
    issues += validate(ds).issues
    for issue in issues:
        print(issue)
    if issues:
        return EXIT_INVALID
    print(f"ok: {len(recs)} recordings, {ds.n_bouts} bouts, {len(ds.subjects)} subjects")
    return EXIT_OK


def cmd_features(args):
    from .pipeline import pipeline_features
    ds = _load(args)
    keys, X, y, k = pipeline_features(ds, args.set, args.regime, args.seed, args.k_max)
    names = feature_names(args.set, k, DIM, args.regime == "All")
    write_feature_csv(args.out, names, keys, X, y)
    return EXIT_OK


def cmd_train(args):
    from .pipeline import train_pipeline
    ds = _load(args)
    pipe = train_pipeline(ds, args.estimator, args.set, args.regime, args.seed, args.k_max)
    Path(args.out).write_text(pipe.dumps())
    return EXIT_OK


def cmd_loso(args):
    obj = _read_json(args.config, "--config") if args.config else {}
    overrides = {"data": args.data, "out": args.out, "seed": args.seed, "k_max": args.k_max,
                 "jobs": args.jobs}
    obj.update({k: v for k, v in overrides.items() if v is not None})
    if obj.get("data") is None:
        raise UsageError("--data: required (or set 'data' in --config)")
    if obj.get("out") is None:
        raise UsageError("--out: required (or set 'out' in --config)")
    try:
        cfg = harness.ExperimentConfig.from_json(obj)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--config: {exc}") from None
    _existing(cfg.data, "--data", "directory")
    ds = load_dataset(cfg.data)
    report = harness.loso_run(cfg, ds)
    leaks = harness.verify_no_leakage(report, ds)
    if leaks:
        raise RuntimeError("leakage detected: " + "; ".join(leaks))
    harness.write_outputs(report, cfg.out)
    return EXIT_OK


def cmd_report(args):
    report = _read_json(args.input, "--in")
    harness.render_report_files(report, args.out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="biteweight", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sets = [f.value for f in FEATURE_SETS]

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--config", help="SynthConfig JSON (defaults used when omitted)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=seed_arg, help="override the config seed")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("validate", help="check a dataset directory")
    s.add_argument("--data", required=True, help="dataset directory")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("features", help="write bout feature vectors to CSV")
    s.add_argument("--data", required=True, help="dataset directory")
    s.add_argument("--set", required=True, choices=sets, help="feature set")
    s.add_argument("--out", required=True, help="output CSV")
    s.add_argument("--regime", default="All", choices=harness.REGIMES, help="food regime (default All)")
    s.add_argument("--seed", type=seed_arg, default=0, help="codebook seed (default 0)")
    s.add_argument("--k-max", type=positive_int, default=DEFAULT_K_MAX, help="largest codebook size")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", help="fit one estimator on every bout of a regime")
    s.add_argument("--data", required=True, help="dataset directory")
    s.add_argument("--estimator", required=True, choices=[k.value for k in ESTIMATORS])
    s.add_argument("--set", required=True, choices=sets, help="feature set")
    s.add_argument("--regime", default="All", choices=harness.REGIMES, help="food regime (default All)")
    s.add_argument("--seed", type=seed_arg, default=0, help="master seed (default 0)")
    s.add_argument("--k-max", type=positive_int, default=DEFAULT_K_MAX, help="largest codebook size")
    s.add_argument("--out", required=True, help="model JSON path")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("loso", help="run the leave-one-subject-out grid")
    s.add_argument("--data", help="dataset directory (overrides config)")
    s.add_argument("--config", help="experiment config JSON")
    s.add_argument("--out", help="output directory (overrides config)")
    s.add_argument("--jobs", type=positive_int, help="worker processes; results do not depend on it")
    s.add_argument("--seed", type=seed_arg, help="master seed (overrides config)")
    s.add_argument("--k-max", type=positive_int, help="largest codebook size (overrides config)")
    s.set_defaults(func=cmd_loso)

    s = sub.add_parser("report", help="re-render tables and figure from report.json")
    s.add_argument("--in", dest="input", required=True, help="report.json")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"biteweight {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, ValueError) as exc:
        print(f"biteweight {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
