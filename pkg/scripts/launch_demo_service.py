#!/usr/bin/env python3
"""Train a small ensemble on the synthetic benchmark and serve it.

One-stop entry point for trying the HTTP API or developing the web UI:
generates the benchmark, trains a quick cross-validated ensemble, saves the
artifacts under --out, and starts the inference service.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tabrisk.data import (BenchmarkConfig, fit_minmax, generate_benchmark_dataset,
                          save_dataset, split_balanced_test, transform_minmax)
from tabrisk.ensemble import EnsembleModel
from tabrisk.nn import BACKBONES, TrainConfig, kfold_train
from tabrisk.service import load_service_data, serve


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("demo_out"))
    parser.add_argument("--backbone", default="v2", choices=sorted(BACKBONES))
    parser.add_argument("--folds", type=int, default=4)
    parser.add_argument("--max-epochs", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    return parser.parse_args()


def main() -> int:
    args = parse_args()
    ensemble_path = args.out / "ensemble.json"
    pool_path = args.out / "pool.csv"

    if ensemble_path.exists() and pool_path.exists():
        print(f"reusing artifacts in {args.out}")
    else:
        print(f"seed: {args.seed}")
        data = generate_benchmark_dataset(BenchmarkConfig(seed=args.seed))
        train, _ = split_balanced_test(data, 19, seed=args.seed)
        scaler = fit_minmax(train)
        folds = kfold_train(transform_minmax(scaler, train.X), train.y,
                            args.backbone,
                            TrainConfig(max_epochs=args.max_epochs,
                                        k_folds=args.folds, seed=args.seed))
        ensemble = EnsembleModel.from_fold_results(folds, scaler, train.schema)
        args.out.mkdir(parents=True, exist_ok=True)
        ensemble.save(ensemble_path)
        save_dataset(train, pool_path, include_provenance=False)
        alphas = ", ".join(f"{a:.3f}" for a in ensemble.alphas)
        print(f"trained {args.backbone} x{args.folds} folds; alphas [{alphas}]")

    load_service_data(ensemble_path, pool_path)  # fail fast before binding
    print(f"serving http://{args.host}:{args.port}")
    serve(ensemble_path, pool_path, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
