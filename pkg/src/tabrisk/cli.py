"""Command-line entry point for every pipeline stage.

Exit codes: 0 success, 1 usage error (unknown subcommand/flag, bad argument
syntax), 2 runtime failure (missing files, invalid data, training errors).
Every randomized subcommand takes a seed (flag or config) and prints the
seed it used, so any run can be reproduced verbatim.  All outputs are files;
"plots" are emitted as CSV/JSON data for downstream rendering.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this contract reserves 2 for
    runtime failures, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ helpers


def _load_schema(path):
    from .schema import FeatureSchema

    return FeatureSchema.load(path)


def _load_data(path, schema_path):
    from .data import load_dataset

    return load_dataset(path, _load_schema(schema_path))


def _read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _write_json(path, doc) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _print_seed(seed: int) -> None:
    print(f"seed: {seed}")


def _augment_configs(doc: dict, seed_override):
    """Split a config document into augmentation and generator settings."""
    from .augment import AugmentConfig
    from .gan import GanConfig

    gan_doc = dict(doc.get("gan", {}))
    for key in ("generator_layers", "discriminator_layers"):
        if key in gan_doc:
            gan_doc[key] = tuple(gan_doc[key])
    aug_doc = {k: v for k, v in doc.items() if k != "gan"}
    if seed_override is not None:
        aug_doc["seed"] = seed_override
        gan_doc["seed"] = seed_override
    return AugmentConfig(**aug_doc), GanConfig(**gan_doc)


def _table3_doc(report) -> dict:
    """Top-level keys follow the summary-table column names."""
    return {
        "loss": report.bce_loss,
        "accuracy": report.accuracy,
        "sensitivity": report.sensitivity,
        "specificity": report.specificity,
        "f1_positive": report.f1_pos,
        "f1_negative": report.f1_neg,
        "macro_f1": report.macro_f1,
        "report": report.to_json_dict(),
    }


# --------------------------------------------------------------- handlers


def _cmd_gen_bench(args) -> int:
    from .data import BenchmarkConfig, generate_benchmark_dataset, save_dataset

    overrides = _read_json(args.config) if args.config else {}
    config = BenchmarkConfig(**{**overrides, "seed": args.seed})
    dataset = generate_benchmark_dataset(config)
    _print_seed(config.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, args.out)
    if args.schema:
        dataset.schema.save(args.schema)
    neg, pos = dataset.class_counts()
    print(f"wrote {len(dataset)} records ({neg} negative / {pos} positive) "
          f"to {args.out}")
    return 0


def _cmd_augment(args) -> int:
    from .augment import adasyn_balance_loop, gan_three_phase_augment
    from .data import save_dataset

    dataset = _load_data(args.data, args.schema)
    aug_cfg, gan_cfg = _augment_configs(_read_json(args.config), args.seed)
    _print_seed(aug_cfg.seed)
    if aug_cfg.method == "adasyn":
        augmented, report = adasyn_balance_loop(dataset, aug_cfg)
    else:
        augmented, report = gan_three_phase_augment(dataset, aug_cfg, gan_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(augmented, out / "augmented.csv", include_provenance=True)
    report.save(out / "augment_report.json")
    print(f"{len(dataset)} -> {len(augmented)} records "
          f"({report.total_generated} generated, "
          f"{report.total_discarded} discarded)")
    return 0


def _cmd_train(args) -> int:
    from .data import fit_minmax, transform_minmax
    from .ensemble import EnsembleModel
    from .nn import TrainConfig, kfold_train

    dataset = _load_data(args.data, args.schema)
    overrides = _read_json(args.config) if args.config else {}
    config = TrainConfig(**{**overrides, "seed": args.seed})
    _print_seed(config.seed)
    scaler = fit_minmax(dataset)
    folds = kfold_train(transform_minmax(scaler, dataset.X), dataset.y,
                        args.backbone, config)
    ensemble = EnsembleModel.from_fold_results(
        folds, scaler, dataset.schema, decision_threshold=args.threshold)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    ensemble.save(args.out)
    scores = ", ".join(f"{f.val_macro_f1:.3f}" for f in folds)
    print(f"trained {len(folds)} x {args.backbone} "
          f"(val macro-F1: {scores}) -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .data import load_dataset
    from .ensemble import EnsembleModel
    from .metrics import classification_report, roc_sweep

    ensemble = EnsembleModel.load(args.ensemble)
    dataset = load_dataset(args.data, ensemble.schema)
    threshold = args.threshold if args.threshold is not None \
        else ensemble.decision_threshold
    probs = ensemble.predict_proba_batch(dataset.X)
    report = classification_report(dataset.y, probs, threshold)
    curve, _ = roc_sweep(dataset.y, probs, sorted(set(float(p) for p in probs)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "metrics.json", _table3_doc(report))
    curve.save_csv(out / "roc.csv")
    print(f"n={len(dataset)} accuracy={report.accuracy:.3f} "
          f"macro_f1={report.macro_f1:.3f} auroc={report.auroc:.3f}")
    return 0


def _cmd_explain(args) -> int:
    from .data import load_dataset
    from .ensemble import EnsembleModel, classify
    from .explain import (generate_counterfactual, counterfactual_to_json_dict,
                          shapley_attribution)

    ensemble = EnsembleModel.load(args.ensemble)
    if args.threshold is not None:
        ensemble = replace(ensemble, decision_threshold=args.threshold)
    cases = load_dataset(args.data, ensemble.schema)
    pool = load_dataset(args.pool, ensemble.schema) if args.pool else cases
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    abnormal = [i for i in range(len(cases))
                if classify(ensemble.predict_proba(cases.X[i]),
                            ensemble.decision_threshold) == 1]
    if not abnormal:
        print("no abnormal-classified cases: counterfactuals target "
              "abnormal-classified records only")
    if args.mode in ("counterfactual", "both"):
        docs = []
        for i in abnormal:
            cf = generate_counterfactual(cases.record(i), ensemble, pool,
                                         args.max_changes)
            doc = counterfactual_to_json_dict(cf, ensemble.schema)
            doc["case_index"] = i
            docs.append(doc)
        _write_json(out / "counterfactuals.json", docs)
        print(f"wrote {len(docs)} counterfactuals")
    if args.mode in ("attribution", "both"):
        _print_seed(args.seed)
        docs = []
        for i in abnormal:
            att = shapley_attribution(ensemble, cases.record(i), pool,
                                      args.n_samples, args.seed)
            doc = att.to_json_dict()
            doc["case_index"] = i
            docs.append(doc)
        _write_json(out / "attributions.json", docs)
        print(f"wrote {len(docs)} attributions")
    return 0


def _cmd_gap(args) -> int:
    from .metrics import distribution_gap

    if args.rep_dir:
        rep = _read_json(Path(args.rep_dir) / "repetition.json")
        test = _read_json(Path(args.rep_dir) / "metrics_test.json")
        val_losses = [m["val_loss"] for m in rep["fold_metadata"]]
        test_loss = test["bce_loss"]
    elif args.val_losses and args.test_loss is not None:
        val_losses = [float(v) for v in args.val_losses.split(",")]
        test_loss = args.test_loss
    else:
        raise ValueError("provide --rep-dir or both --val-losses and --test-loss")
    report = distribution_gap(val_losses, test_loss)
    _write_json(args.out, report.to_json_dict())
    print(f"l_val={report.mean_val_loss:.6f} l_test={report.test_loss:.6f} "
          f"gap={report.gap_percent:.1f}%")
    return 0


def _cmd_experiment(args) -> int:
    from .data import BenchmarkConfig, generate_benchmark_dataset
    from .experiment import ExperimentConfig, run_experiment

    config = ExperimentConfig.load(args.config)
    if args.pipeline:
        config = replace(config, pipeline=args.pipeline)
    if args.backbone:
        config = replace(config, backbone_id=args.backbone)
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    if args.data:
        if not args.schema:
            raise ValueError("--data requires --schema")
        data = _load_data(args.data, args.schema)
    else:
        data = generate_benchmark_dataset(BenchmarkConfig(seed=config.base_seed))
    _print_seed(config.base_seed)
    result = run_experiment(config, data, args.out)
    table3 = result.aggregate["table3"]
    print(f"pipeline={config.pipeline} backbone={config.backbone_id} "
          f"completed={result.aggregate['completed_repetitions']}"
          f"/{config.n_repetitions} "
          f"macro_f1={table3['macro_f1']['mean']:.3f}"
          f"+/-{table3['macro_f1']['std']:.3f}")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(args.ensemble, args.pool, host=args.host, port=args.port)
    return 0


# ----------------------------------------------------------------- parser


def build_parser() -> _Parser:
    parser = _Parser(prog="tabrisk", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("gen-bench", help="emit a synthetic benchmark CSV")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--config", help="JSON overrides for the benchmark generator")
    p.add_argument("--schema", help="also write the feature schema JSON here")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_gen_bench)

    p = sub.add_parser("augment", help="augment a dataset and write a report")
    p.add_argument("--data", required=True, help="input dataset CSV")
    p.add_argument("--schema", required=True, help="feature schema JSON")
    p.add_argument("--config", required=True,
                   help="augmentation config JSON (optional 'gan' sub-object)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_augment)

    p = sub.add_parser("train", help="train a k-fold voting ensemble")
    p.add_argument("--data", required=True, help="training dataset CSV")
    p.add_argument("--schema", required=True, help="feature schema JSON")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--backbone", default="v5",
                   help="network variant id (v1..v5)")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="decision threshold stored in the ensemble")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output ensemble JSON path")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("eval", help="score an ensemble on a labeled CSV")
    p.add_argument("--ensemble", required=True, help="ensemble JSON path")
    p.add_argument("--data", required=True, help="labeled test CSV")
    p.add_argument("--threshold", type=float,
                   help="override the stored decision threshold")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("explain",
                       help="counterfactuals/attributions for abnormal cases")
    p.add_argument("--ensemble", required=True, help="ensemble JSON path")
    p.add_argument("--data", required=True, help="cases CSV")
    p.add_argument("--pool", help="neighbor pool CSV (default: the cases file)")
    p.add_argument("--mode", choices=("counterfactual", "attribution", "both"),
                   default="both")
    p.add_argument("--threshold", type=float,
                   help="override the stored decision threshold")
    p.add_argument("--max-changes", type=int,
                   help="counterfactual substitution budget")
    p.add_argument("--n-samples", type=int, default=200,
                   help="attribution permutation samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_explain)

    p = sub.add_parser("gap", help="validation/test loss gap report")
    p.add_argument("--rep-dir", help="repetition directory from an experiment run")
    p.add_argument("--val-losses", help="comma-separated fold validation losses")
    p.add_argument("--test-loss", type=float)
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(handler=_cmd_gap)

    p = sub.add_parser("experiment", help="run a full multi-repetition study")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--data", help="dataset CSV (default: generated benchmark)")
    p.add_argument("--schema", help="schema JSON for --data")
    p.add_argument("--pipeline", help="override the config pipeline")
    p.add_argument("--backbone", help="override the config backbone")
    p.add_argument("--seed", type=int, help="override the config base seed")
    p.add_argument("--out", required=True, help="run output directory")
    p.set_defaults(handler=_cmd_experiment)

    p = sub.add_parser("serve", help="start the HTTP inference service")
    p.add_argument("--ensemble", required=True, help="ensemble JSON path")
    p.add_argument("--pool", required=True, help="neighbor pool CSV")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("TABRISK_PORT", "8000")))
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except Exception as exc:  # runtime failures are diagnostics, not traces
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
