"""Command-line interface.

Subcommands: simulate, map, evaluate, compare-models, spiking-demo, report.
Exit codes: 0 success, 1 config error, 2 data error, 3 partial failures
above the configured threshold.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .data import SplitSpec, load_dataset, save_dataset
from .exceptions import ConfigError, DatasetError, IatcError
from .metrics import predictivity_per_neuron
from .pipeline import (
    EvaluationReport,
    config_from_dict,
    emit_report,
    load_config_file,
    run_model_comparison,
    run_population_eval,
    stable_seed,
)
from .simulate import PopulationConfig, fit_activation_candidates, generate_population, spiking_curve
from .transforms import make_method, method_kinds

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="iatc",
        description="Cross-subject neural response mapping toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic population dataset")
    p.add_argument("--config", help="TOML/JSON file with population settings")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, help="override the teacher seed")
    p.add_argument("--store-trials", action="store_true",
                   help="write per-trial CSVs for post-nonlinearity profiles")

    p = sub.add_parser("map", help="fit one source->target pair and print the score")
    p.add_argument("--dataset", required=True)
    p.add_argument("--source", required=True, help="subject:area[:stage]")
    p.add_argument("--target", required=True, help="subject:area[:stage]")
    p.add_argument("--method", required=True, choices=method_kinds())
    p.add_argument("--params", default="{}", help="method hyperparameters as JSON")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-map", help="write the fitted map as JSON")

    p = sub.add_parser("evaluate", help="config-driven population evaluation")
    p.add_argument("--config", help="TOML/JSON experiment config")
    p.add_argument("--dataset", help="dataset directory (overrides config)")
    p.add_argument("--methods", help="comma-separated method kinds (overrides config)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--jobs", type=int, help="worker pool size (overrides config)")
    p.add_argument("--stage", help="profile stage to evaluate (overrides config)")
    p.add_argument("--correction", choices=["none", "bootstrap", "nc"])
    p.add_argument("--fast", action="store_true",
                   help="reduced bootstrap preset (16 samples, 1 split)")
    p.add_argument("--pool-sources", action="store_true",
                   help="also score pooled-source -> held-out-subject predictivity")

    p = sub.add_parser("compare-models", help="bidirectional model-vs-population scoring")
    p.add_argument("--config", required=True, help="config with a [[models]] list")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--correction", choices=["none", "bootstrap", "nc"])
    p.add_argument("--fast", action="store_true")

    p = sub.add_parser("spiking-demo", help="threshold-crossing spike counts vs activation fits")
    p.add_argument("--out", help="write the curve and fits as CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--mu-min", type=float, default=None, help="default: threshold - 3*sigma")
    p.add_argument("--mu-max", type=float, default=None, help="default: threshold + 1*sigma")
    p.add_argument("--points", type=int, default=41)

    p = sub.add_parser("report", help="re-render CSVs from an existing report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)

    return parser


def _cmd_simulate(args):
    raw = load_config_file(args.config) if args.config else {}
    if not isinstance(raw, dict):
        raise ConfigError("simulate config must be a table/object")
    raw = dict(raw)
    raw.pop("out", None)
    if args.seed is not None:
        raw["teacher_seed"] = args.seed
    if args.store_trials:
        raw["attach_trials"] = True
    try:
        cfg = PopulationConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad population config: {exc}") from None
    dataset = generate_population(cfg)
    save_dataset(dataset, args.out, include_trials=True)
    print(f"wrote {len(dataset.profiles)} profiles to {args.out}")
    return EXIT_OK


def _parse_profile_ref(ref):
    parts = ref.split(":")
    if len(parts) == 2:
        return parts[0], parts[1], None
    if len(parts) == 3:
        return parts[0], parts[1], parts[2]
    raise ConfigError(f"profile reference must be subject:area[:stage], got {ref!r}")


def _cmd_map(args):
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params is not valid JSON: {exc}") from None
    dataset = load_dataset(args.dataset)
    src = dataset.get(*_parse_profile_ref(args.source))
    tgt = dataset.get(*_parse_profile_ref(args.target))
    method = make_method(args.method, seed=args.seed, **params)
    split = SplitSpec(args.train_fraction, seed=stable_seed(args.seed, "split"))
    r2 = predictivity_per_neuron(src, tgt, method, split)
    score = float(np.nanmedian(r2))
    print(f"{args.method} {args.source} -> {args.target}: median test R^2 = {score:.6f}")
    if args.dump_map:
        from .data import split_stimuli

        train, _ = split_stimuli(src.matrix.n_stimuli, split)
        fitted = method.fit(src.matrix.values[train], tgt.matrix.values[train])
        Path(args.dump_map).write_text(
            json.dumps(fitted.to_jsonable(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        print(f"wrote fitted map to {args.dump_map}")
    return EXIT_OK


def _merged_config(args, need_models=False):
    raw = load_config_file(args.config) if args.config else {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table/object")
    raw = dict(raw)
    if getattr(args, "dataset", None):
        raw["dataset"] = args.dataset
    if getattr(args, "methods", None):
        raw["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    for key in ("out", "seed", "jobs", "stage", "correction"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    if getattr(args, "fast", False):
        raw["fast"] = True
    if getattr(args, "pool_sources", False):
        raw["pool_sources"] = True
    cfg = config_from_dict(raw)
    if need_models and not cfg.models:
        raise ConfigError("compare-models needs a [[models]] list in the config")
    return cfg


def _finish_run(cfg, report: EvaluationReport):
    if cfg.out:
        paths = emit_report(report, cfg.out)
        for p in paths:
            print(f"wrote {p}")
    else:
        sys.stdout.write(report.to_json())
    if report.n_tasks and report.n_failed / report.n_tasks > cfg.fail_threshold:
        print(
            f"warning: {report.n_failed}/{report.n_tasks} cells failed "
            f"(threshold {cfg.fail_threshold})",
            file=sys.stderr,
        )
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_evaluate(args):
    cfg = _merged_config(args)
    report = run_population_eval(cfg)
    return _finish_run(cfg, report)


def _cmd_compare_models(args):
    cfg = _merged_config(args, need_models=True)
    report = run_model_comparison(cfg)
    return _finish_run(cfg, report)


def _cmd_spiking_demo(args):
    mu_min = args.mu_min if args.mu_min is not None else args.threshold - 3.0 * args.sigma
    mu_max = args.mu_max if args.mu_max is not None else args.threshold + 1.0 * args.sigma
    if args.points < 4:
        raise ConfigError("need at least 4 grid points")
    mu = np.linspace(mu_min, mu_max, args.points)
    curve = spiking_curve(mu, sigma=args.sigma, threshold=args.threshold,
                          trials=args.trials, seed=args.seed)
    fits = fit_activation_candidates(curve.mu_values, curve.empirical_means)
    print(f"spiking model: {curve.bins} bins, {curve.trials} trials per mu")
    for name in ("softplus", "relu", "exponential"):
        print(f"  {name:12s} residual SS = {fits[name].residual:.4f}")
    best = min(fits.values(), key=lambda f: f.residual)
    print(f"best fit: {best.name}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mu", "empirical_mean", "analytic_mean", "single_trial"])
            for row in zip(curve.mu_values, curve.empirical_means,
                           curve.analytic_means, curve.single_trial):
                writer.writerow([f"{v:.17g}" for v in row])
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_report(args):
    path = Path(args.report)
    if not path.is_file():
        raise DatasetError(f"report file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON ({exc})") from None
    report = EvaluationReport.from_jsonable(obj)
    for p in emit_report(report, args.out, formats=("csv",)):
        print(f"wrote {p}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "map": _cmd_map,
    "evaluate": _cmd_evaluate,
    "compare-models": _cmd_compare_models,
    "spiking-demo": _cmd_spiking_demo,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, IatcError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
