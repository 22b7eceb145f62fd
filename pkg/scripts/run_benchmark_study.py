#!/usr/bin/env python3
"""Paired pipeline study on the synthetic benchmark.

Runs an augmentation pipeline and the no-augment baseline on the same data
and per-repetition seeds, then prints a side-by-side test macro-F1 table.
Artifacts (per-repetition ensembles, metrics, reports) land under --out.
"""

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tabrisk.augment import AugmentConfig
from tabrisk.data import BenchmarkConfig, generate_benchmark_dataset
from tabrisk.experiment import PIPELINES, ExperimentConfig, run_experiment
from tabrisk.gan import GanConfig
from tabrisk.nn import BACKBONES, TrainConfig


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("study_out"))
    parser.add_argument("--pipeline", default="aimen_ctgan",
                        choices=sorted(p for p in PIPELINES if p != "no_augment"))
    parser.add_argument("--backbone", default="v5", choices=sorted(BACKBONES))
    parser.add_argument("--folds", type=int, default=8)
    parser.add_argument("--repetitions", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-epochs", type=int, default=20)
    parser.add_argument("--learning-rate", type=float, default=1e-4)
    return parser.parse_args()


def main() -> int:
    args = parse_args()
    config = ExperimentConfig(
        pipeline=args.pipeline,
        backbone_id=args.backbone,
        augment=AugmentConfig(size_multiplier=2.0, min_per_class=1400,
                              postprocess="round_int", batch_size_generated=200),
        train=TrainConfig(learning_rate=args.learning_rate,
                          max_epochs=args.max_epochs, early_stop_patience=8,
                          batch_size=64, k_folds=args.folds),
        gan=GanConfig(),
        n_repetitions=args.repetitions,
        base_seed=args.seed,
        test_per_class=19,
    )
    print(f"seed: {args.seed}")
    data = generate_benchmark_dataset(BenchmarkConfig(seed=args.seed))
    neg, pos = data.class_counts()
    print(f"benchmark: {len(data)} records ({neg} normal / {pos} abnormal)")

    results = {}
    for pipeline in (args.pipeline, "no_augment"):
        run_dir = args.out / pipeline
        start = time.perf_counter()
        results[pipeline] = run_experiment(replace(config, pipeline=pipeline),
                                           data, run_dir)
        print(f"{pipeline}: {time.perf_counter() - start:.0f}s -> {run_dir}")

    treated = [r.test_report.macro_f1 for r in results[args.pipeline].repetitions]
    control = [r.test_report.macro_f1 for r in results["no_augment"].repetitions]
    print(f"\n{'rep':>3}  {args.pipeline:>14}  {'no_augment':>10}  win")
    for i, (a, b) in enumerate(zip(treated, control)):
        print(f"{i:>3}  {a:>14.4f}  {b:>10.4f}  {'yes' if a > b else 'no'}")
    wins = sum(a > b for a, b in zip(treated, control))
    print(f"\nwins: {wins}/{len(treated)}")
    purity = all(r.purity["passed"]
                 for res in results.values() for r in res.repetitions)
    print(f"test-set purity audit: {'passed' if purity else 'FAILED'}")
    return 0 if purity else 1


if __name__ == "__main__":
    sys.exit(main())
