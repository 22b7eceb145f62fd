"""Pipeline driver: completion, determinism, purity auditing, failure
recording, and aggregate recomputation from run-directory files."""

import json

import numpy as np
import pytest

import tabrisk.experiment as experiment_module
from tabrisk.augment import AugmentConfig
from tabrisk.data import BenchmarkConfig, generate_benchmark_dataset
from tabrisk.ensemble import EnsembleModel
from tabrisk.experiment import (
    ExperimentConfig,
    ExperimentError,
    purity_audit,
    recompute_aggregate,
    run_experiment,
)
from tabrisk.gan import GanConfig
from tabrisk.nn import TrainConfig
from tabrisk.schema import Dataset, FeatureSchema, numeric


def small_benchmark(seed=1):
    return generate_benchmark_dataset(BenchmarkConfig(n_total=170, n_positive=45,
                                                      seed=seed))


def light_config(pipeline, **kw):
    defaults = dict(
        pipeline=pipeline,
        backbone_id="v1",
        augment=AugmentConfig(size_multiplier=1.0, min_per_class=80,
                              batch_size_generated=40, silhouette_min=-0.9,
                              postprocess="round_int", k_neighbors=5),
        train=TrainConfig(learning_rate=1e-3, max_epochs=8, early_stop_patience=4,
                          batch_size=32, k_folds=3),
        gan=GanConfig(noise_dim=8, generator_layers=(24,),
                      discriminator_layers=(24,), epochs=15, batch_size=32),
        n_repetitions=2,
        base_seed=3,
        test_per_class=10,
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def test_no_augment_completes_and_flags_imbalance(tmp_path):
    data = small_benchmark()
    result = run_experiment(light_config("no_augment"), data, tmp_path / "run")
    assert len(result.repetitions) == 2 and result.failures == []
    for rep in result.repetitions:
        assert rep.class_imbalance  # raw benchmark is imbalanced
        assert rep.augment_report is None
        assert rep.purity["passed"]
        # real-test evaluation only: exactly 10 records per class
        counts = rep.test_report.counts
        assert counts.tp + counts.fn == 10
        assert counts.tn + counts.fp == 10
    agg = result.aggregate
    assert set(agg["table3"]) == {"loss", "accuracy", "sensitivity", "specificity",
                                  "f1_positive", "f1_negative", "macro_f1"}
    assert set(agg["table4"]) == {"best_val_loss", "l_val", "l_test", "gap_percent"}
    assert agg["completed_repetitions"] == 2
    assert agg["repetition_seeds"] == [3, 4]


def test_adasyn_pipeline_balances_and_writes_artifacts(tmp_path):
    data = small_benchmark()
    run_dir = tmp_path / "run"
    result = run_experiment(light_config("aimen_adasyn"), data, run_dir)
    assert result.failures == []
    for rep in result.repetitions:
        assert rep.augment_report is not None
        assert rep.augment_report.method == "adasyn"
        neg, pos = rep.augment_report.final_class_counts
        assert neg == pos and pos >= 80
        assert not rep.class_imbalance
    for r in range(2):
        rep_dir = run_dir / f"rep_{r:02d}"
        for name in ("metrics_test.json", "metrics_train.json", "metrics_val.json",
                     "gap.json", "augment_report.json", "repetition.json",
                     "ensemble.json"):
            assert (rep_dir / name).exists(), name
        EnsembleModel.load(rep_dir / "ensemble.json")  # loadable export
    assert (run_dir / "config.json").exists()
    assert (run_dir / "aggregate.json").exists()


def test_ctgan_gated_pipeline_smoke(tmp_path):
    data = small_benchmark()
    result = run_experiment(light_config("r_aimen_negative", n_repetitions=1),
                            data, tmp_path / "run")
    rep = result.repetitions[0]
    assert rep.augment_report.method == "ctgan"
    assert rep.augment_report.restriction == "negative_only"
    assert rep.augment_report.initial_silhouette is not None
    neg, pos = rep.augment_report.final_class_counts
    assert neg == pos


def test_identical_runs_are_byte_identical(tmp_path):
    data = small_benchmark()
    config = light_config("aimen_adasyn")
    run_experiment(config, data, tmp_path / "a")
    run_experiment(config, data, tmp_path / "b")
    for rel in ("aggregate.json", "config.json", "rep_00/metrics_test.json",
                "rep_00/ensemble.json", "rep_01/gap.json", "rep_01/repetition.json"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_different_base_seed_changes_results(tmp_path):
    data = small_benchmark()
    a = run_experiment(light_config("no_augment"), data, tmp_path / "a")
    b = run_experiment(light_config("no_augment", base_seed=99), data, tmp_path / "b")
    assert a.aggregate["table3"] != b.aggregate["table3"]


def test_aggregate_recomputable_from_files(tmp_path):
    data = small_benchmark()
    run_dir = tmp_path / "run"
    result = run_experiment(light_config("aimen_adasyn"), data, run_dir)
    assert recompute_aggregate(run_dir) == result.aggregate
    with open(run_dir / "aggregate.json") as fh:
        assert json.load(fh) == result.aggregate


def test_failed_repetition_recorded_and_run_continues(tmp_path, monkeypatch):
    data = small_benchmark()
    real_kfold = experiment_module.kfold_train
    calls = {"n": 0}

    def flaky(X, y, backbone_id, config):
        calls["n"] += 1
        if calls["n"] == 1:
            raise RuntimeError("injected fold failure")
        return real_kfold(X, y, backbone_id, config)

    monkeypatch.setattr(experiment_module, "kfold_train", flaky)
    result = run_experiment(light_config("no_augment"), data, tmp_path / "run")
    assert len(result.repetitions) == 1
    assert len(result.failures) == 1
    assert result.failures[0]["repetition"] == 0
    assert "injected fold failure" in result.failures[0]["error"]
    assert result.aggregate["completed_repetitions"] == 1
    assert result.aggregate["failed_repetitions"] == result.failures
    # the failure is visible in the run directory and in recomputation
    with open(tmp_path / "run" / "rep_00" / "repetition.json") as fh:
        assert json.load(fh)["error"] is not None
    assert recompute_aggregate(tmp_path / "run") == result.aggregate


def test_all_repetitions_failed_raises(tmp_path, monkeypatch):
    data = small_benchmark()

    def always_fail(X, y, backbone_id, config):
        raise RuntimeError("nope")

    monkeypatch.setattr(experiment_module, "kfold_train", always_fail)
    with pytest.raises(ExperimentError, match="all repetitions failed"):
        run_experiment(light_config("no_augment"), data, tmp_path / "run")


def test_purity_audit_detects_leak():
    schema = FeatureSchema(features=(numeric("u", 0, 10),), outcome_name="y")
    X = np.array([[1.0], [2.0], [3.0]])
    test = Dataset(schema=schema, X=X[:1], y=np.array([1]), provenance=["real"])
    train = Dataset(schema=schema, X=X, y=np.array([1, 0, 0]),
                    provenance=["real"] * 3)
    with pytest.raises(ExperimentError, match="leaked"):
        purity_audit(test, {"train": train})
    clean = Dataset(schema=schema, X=X[1:], y=np.array([0, 0]),
                    provenance=["real"] * 2)
    audit = purity_audit(test, {"train": clean})
    assert audit == {"test_vectors": 1, "overlaps": {"train": 0}, "passed": True}


def test_config_validation_and_json_round_trip(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig(pipeline="smote_everything")
    with pytest.raises(ValueError):
        ExperimentConfig(n_repetitions=0)
    with pytest.raises(ValueError):
        ExperimentConfig(ce_pool="internet")
    config = light_config("r_aimen_both", ce_max_changes=4)
    path = tmp_path / "config.json"
    config.save(path)
    assert ExperimentConfig.load(path) == config


def test_single_class_data_rejected(tmp_path):
    schema = FeatureSchema(features=(numeric("u", 0, 10),), outcome_name="y")
    data = Dataset(schema=schema, X=np.linspace(0, 9, 30).reshape(-1, 1),
                   y=np.zeros(30, dtype=np.int64), provenance=["real"] * 30)
    with pytest.raises(ExperimentError):
        run_experiment(light_config("no_augment"), data, tmp_path / "run")
