"""Command-line pipeline: synth, prepare, times, train, evaluate, compare, explain.

Every subcommand takes ``--config`` and emits deterministic CSV artifacts
under the configured output directory plus a human-readable summary on
stdout.  Exit codes: 0 ok, 2 configuration error, 3 data error, 1 internal
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import baseline, classify, explain as explain_mod, forest, metrics, model_io, synthgen
from .cohort import Approach, balance_and_split, build_samples, read_samples_csv, sample_arrays, write_samples_csv
from .config import RunConfig
from .errors import ConfigError, DataError
from .features import arities as feature_arities
from .records import parse_records, write_bundle

DAYS_PER_MONTH_BIN = 30.44


def _write_csv(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _fmt(value) -> str:
    return "n/a" if value is None else repr(float(value))


def cmd_synth(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    spec = cfg.synth_spec()
    records, truths = synthgen.generate(spec)
    bundle_dir = cfg.resolve_path("bundle_dir")
    write_bundle(records, bundle_dir)
    out = cfg.out_dir()
    synthgen.write_ground_truth(truths, out / "ground_truth.csv")
    specs = synthgen.feature_specs(spec)
    with open(out / "features.json", "w") as fh:
        json.dump([s.to_dict() for s in specs], fh, indent=1)
    n_events = sum(t.event for t in truths)
    print(f"synth: wrote {len(records)} patients to {bundle_dir}")
    print(f"synth: {n_events} diagnosed inside follow-up "
          f"({n_events / len(truths):.3f} observed rate)")
    return 0


def _prepare_dataset(cfg: RunConfig, approach=None):
    records, parse_log = parse_records(cfg.resolve_path("bundle_dir"))
    spec = cfg.cohort_spec(approach)
    specs = cfg.feature_list()
    samples, log = build_samples(records, spec, specs)
    dataset = balance_and_split(samples, spec)
    return dataset, specs, log, parse_log, spec


def cmd_prepare(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    dataset, specs, log, parse_log, spec = _prepare_dataset(cfg, args.approach)
    out = cfg.out_dir()
    write_samples_csv(dataset, out / "samples.csv", len(specs))
    counts = log.exclusion_counts()
    print(f"prepare[{spec.approach.value}]: splits "
          f"train={len(dataset.train)} validation={len(dataset.validation)} test={len(dataset.test)}")
    if counts:
        print("prepare: exclusions " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    if log.tie_count:
        print(f"prepare: same-day encounter ties: {log.tie_count}")
    print(f"prepare: parse drops bad_dates={parse_log.bad_dates} duplicates={parse_log.duplicate_rows}")
    return 0


def cmd_times(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    unit = cfg.times_unit()
    records, _ = parse_records(cfg.resolve_path("bundle_dir"))
    try:
        specs = cfg.feature_list()
    except ConfigError:
        specs = []
    approaches = [args.approach] if args.approach else [a.value for a in Approach]
    rows = [["approach", "group", "unit", "bin", "count"]]
    for approach in approaches:
        spec = cfg.cohort_spec(approach)
        samples, _ = build_samples(records, spec, specs)
        for group, flag in (("event", 1), ("normal", 0)):
            bins: dict = {}
            for s in samples:
                if s.event != flag:
                    continue
                b = int(s.time_days // DAYS_PER_MONTH_BIN) if unit == "months" else s.time_days
                bins[b] = bins.get(b, 0) + 1
            for b in sorted(bins):
                rows.append([approach, group, unit, b, bins[b]])
        n_event = sum(1 for s in samples if s.event == 1)
        print(f"times[{approach}]: {n_event} event / {len(samples) - n_event} normal samples")
    _write_csv(cfg.out_dir() / "times.csv", rows)
    return 0


def _fit_risk_model(cfg: RunConfig, dataset, specs, technique=None):
    params = cfg.forest_params()
    X, times, events, _ = sample_arrays(dataset.train)
    fitted = forest.fit(X, times, events, feature_arities(specs), params)
    clf = cfg.classifier_config(technique)
    if clf.technique is classify.Technique.RS:
        clf.rs_threshold = classify.fit_rs_threshold(fitted, X, events, clf.rs_objective)
    return classify.RiskModel(forest=fitted, config=clf)


def cmd_train(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    dataset = read_samples_csv(cfg.out_dir() / "samples.csv")
    specs = cfg.feature_list()
    if not dataset.train:
        raise DataError("training split is empty")
    model = _fit_risk_model(cfg, dataset, specs, args.technique)
    model_io.save_model(cfg.resolve_path("model_file"), model.forest, model.config)
    for split_name, samples in dataset.splits():
        if split_name == "test" or not samples:
            continue
        X, times, events, _ = sample_arrays(samples)
        ci = metrics.c_index(times, events, model.forest.predict_risk_batch(X))
        print(f"train: c-index[{split_name}] = {_fmt(ci)}")
    if model.config.rs_threshold is not None:
        print(f"train: fitted risk threshold = {model.config.rs_threshold!r}")
    print(f"train: model written to {cfg.resolve_path('model_file')}")
    return 0


def _split_samples(dataset, split: str):
    parts = dict(dataset.splits())
    if split not in parts:
        raise ConfigError(f"unknown split {split!r}")
    if not parts[split]:
        raise DataError(f"split {split!r} is empty")
    return parts[split]


def cmd_evaluate(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    dataset = read_samples_csv(cfg.out_dir() / "samples.csv")
    model = model_io.load_risk_model(cfg.resolve_path("model_file"))
    if args.technique:
        model = classify.RiskModel(model.forest, classify.with_technique(model.config, args.technique))
        if model.config.technique is classify.Technique.RS and model.config.rs_threshold is None:
            raise ConfigError("model file has no fitted rs_threshold; retrain with technique=rs")
    samples = _split_samples(dataset, args.split)
    X, times, events, _ = sample_arrays(samples)
    report = metrics.evaluate(model, X, times, events)
    name = f"{cfg.name}[{args.split}]"
    print(metrics.render_report_table([(name, report)]))
    _write_csv(cfg.out_dir() / "report.csv", metrics.report_csv_rows([(name, report)]))
    return 0


def cmd_compare(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    rows = [["approach", "model", "f1", "c_index"]]
    summary: dict = {}
    for approach in [a.value for a in Approach]:
        dataset, specs, _, _, _ = _prepare_dataset(cfg, approach)
        X_val, t_val, e_val, _ = sample_arrays(_split_samples(dataset, "validation"))
        X_tr, t_tr, e_tr, _ = sample_arrays(dataset.train)

        base = baseline.fit_classifier(X_tr, e_tr, feature_arities(specs), cfg.baseline_params())
        f1_base = metrics.confusion_metrics(e_val, base.predict_label_batch(X_val)).f1
        rows.append([approach, "baseline_rf", _fmt(f1_base), "n/a"])
        summary.setdefault("baseline_rf", []).append(f1_base)

        model = _fit_risk_model(cfg, dataset, specs, "rs")
        ci = metrics.c_index(t_val, e_val, model.forest.predict_risk_batch(X_val))
        for technique in ("rs", "sp", "ln"):
            tech_model = classify.RiskModel(model.forest, classify.with_technique(model.config, technique))
            labels, _ = classify.predict_labels(tech_model, X_val)
            f1 = metrics.confusion_metrics(e_val, labels).f1
            rows.append([approach, technique, _fmt(f1), _fmt(ci)])
            summary.setdefault(technique, []).append(f1)
        print(f"compare[{approach}]: done (validation c-index {_fmt(ci)})")
    _write_csv(cfg.out_dir() / "compare.csv", rows)
    print("\naverage validation F1 across approaches")
    for model_name, values in summary.items():
        vals = [v for v in values if v is not None]
        mean = sum(vals) / len(vals) if vals else None
        print(f"  {model_name:12s} {_fmt(mean) if mean is None else f'{mean:.3f}'}")
    return 0


def cmd_explain(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    settings = cfg.explain_settings()
    dataset = read_samples_csv(cfg.out_dir() / "samples.csv")
    model = model_io.load_risk_model(cfg.resolve_path("model_file"))
    split = args.split if args.split != "test" else settings.split
    samples = _split_samples(dataset, split)
    X, _, events, pids = sample_arrays(samples)
    X_train, _, _, _ = sample_arrays(dataset.train)

    rng = np.random.default_rng(cfg.seed)
    n_explained = min(settings.n_explained, X.shape[0])
    chosen = np.sort(rng.choice(X.shape[0], size=n_explained, replace=False))
    n_bg = min(settings.background_size, X_train.shape[0])
    background = X_train[np.sort(rng.choice(X_train.shape[0], size=n_bg, replace=False))]

    attributions = explain_mod.explain_samples(
        model, X[chosen], background, budget=settings.budget, seed=cfg.seed, mode=settings.mode)
    out = cfg.out_dir()

    feature_names = [f"f_{i}" for i in range(X.shape[1])]
    rows = [["sample_id", "feature", "phi"]]
    for idx, attr in zip(chosen, attributions):
        for j, name in enumerate(feature_names):
            rows.append([pids[idx], name, repr(float(attr.phi[j]))])
    _write_csv(out / "attributions.csv", rows)

    ranking = explain_mod.global_importance(attributions, feature_names)
    _write_csv(out / "importance.csv",
               [["feature", "mean_abs_phi", "rank"]]
               + [[name, repr(value), rank + 1] for rank, (name, value) in enumerate(ranking)])
    worst = max(abs(a.residual) for a in attributions)
    print(f"explain: {n_explained} samples, background {n_bg}, "
          f"max |local-accuracy residual| = {worst:.2e}")
    print("explain: top features " + ", ".join(name for name, _ in ranking[:5]))

    if settings.external_importance:
        p = Path(settings.external_importance)
        external = explain_mod.load_importance_csv(p if p.is_absolute() else cfg.config_dir / p)
        agreement_rows = [["k", "top_k_overlap", "rank_correlation"]]
        for k in (5, 20):
            overlap, corr = explain_mod.ranking_agreement(ranking, external, k)
            agreement_rows.append([k, overlap, repr(corr)])
            print(f"explain: top-{k} overlap with external ranking = {overlap}, spearman = {corr:.3f}")
        _write_csv(out / "agreement.csv", agreement_rows)

    curves = explain_mod.clustered_survival_curves(model, X, events)
    curve_rows = [["cluster", "time", "mean_survival"]]
    for (t, p), curve in sorted(curves.items()):
        for time, value in zip(curve.grid, curve.values):
            curve_rows.append([f"true{t}_pred{p}", repr(float(time)), repr(float(value))])
    _write_csv(out / "curves.csv", curve_rows)
    print(f"explain: wrote {len(curves)} cluster curves over {model.forest.grid.size} grid points")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="survrisk",
        description="survival-forest disease risk pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "synth": (cmd_synth, "generate a synthetic patient bundle"),
        "prepare": (cmd_prepare, "records -> balanced, split samples.csv"),
        "times": (cmd_times, "observation-time histograms per approach"),
        "train": (cmd_train, "fit the survival forest and write the model file"),
        "evaluate": (cmd_evaluate, "metrics report for a split"),
        "compare": (cmd_compare, "baseline + all techniques across approaches"),
        "explain": (cmd_explain, "attributions, importance, cluster curves"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the run config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--approach", choices=[a.value for a in Approach], default=None)
        p.add_argument("--technique", choices=["rs", "sp", "ln"], default=None)
        p.add_argument("--split", choices=["train", "validation", "test"], default="test")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except Exception:  # pragma: no cover - defensive
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
