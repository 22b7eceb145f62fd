"""End-to-end pipeline driver: split, augment, cross-validated training,
gated ensembling, held-out evaluation, distribution gap, counterfactual
audit — repeated with shifted seeds and written to a run directory.

Pipelines
---------
aimen_ctgan        three-phase conditional-GAN augmentation, no gating
r_aimen_negative   as above, silhouette gate on generated negatives
r_aimen_both       silhouette gate on both generated classes
aimen_adasyn       interpolation-based balance loop
no_augment         raw training data (imbalance flagged)

Every repetition r reseeds the split, augmentation, and training with
``base_seed + r``, evaluates on real held-out records only, and asserts the
test-set purity audit (no test vector appears in any training input).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, AugmentReport, adasyn_balance_loop, gan_three_phase_augment
from .data import fit_minmax, transform_minmax, split_balanced_test
from .ensemble import EnsembleModel
from .explain import CeReport, evaluate_counterfactuals
from .gan import GanConfig
from .metrics import (
    DistributionGapReport,
    MetricsReport,
    classification_report,
    distribution_gap,
)
from .nn import TrainConfig, forward_batch, kfold_train, stratified_fold_indices
from .schema import Dataset

PIPELINES = ("aimen_ctgan", "r_aimen_negative", "r_aimen_both",
             "aimen_adasyn", "no_augment")
CE_POOLS = ("real_train", "augmented_train")

_CTGAN_RESTRICTION = {"aimen_ctgan": "none",
                      "r_aimen_negative": "negative_only",
                      "r_aimen_both": "both"}


class ExperimentError(RuntimeError):
    """Raised when an experiment cannot produce any completed repetition."""


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: str = "aimen_ctgan"
    backbone_id: str = "v5"
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    gan: GanConfig = field(default_factory=GanConfig)
    n_repetitions: int = 5
    base_seed: int = 0
    test_per_class: int = 19
    decision_threshold: float = 0.5
    gate: float = 0.7
    ce_max_changes: int | None = None
    ce_pool: str = "real_train"

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"pipeline must be one of {PIPELINES}")
        if self.n_repetitions < 1:
            raise ValueError("n_repetitions must be >= 1")
        if self.test_per_class < 1:
            raise ValueError("test_per_class must be >= 1")
        if self.ce_pool not in CE_POOLS:
            raise ValueError(f"ce_pool must be one of {CE_POOLS}")

    def to_json_dict(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "backbone_id": self.backbone_id,
            "augment": asdict(self.augment),
            "train": asdict(self.train),
            "gan": asdict(self.gan),
            "n_repetitions": self.n_repetitions,
            "base_seed": self.base_seed,
            "test_per_class": self.test_per_class,
            "decision_threshold": self.decision_threshold,
            "gate": self.gate,
            "ce_max_changes": self.ce_max_changes,
            "ce_pool": self.ce_pool,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExperimentConfig":
        gan_doc = dict(doc.get("gan", {}))
        for key in ("generator_layers", "discriminator_layers"):
            if key in gan_doc:
                gan_doc[key] = tuple(gan_doc[key])
        return cls(
            pipeline=doc["pipeline"],
            backbone_id=doc.get("backbone_id", "v5"),
            augment=AugmentConfig(**doc.get("augment", {})),
            train=TrainConfig(**doc.get("train", {})),
            gan=GanConfig(**gan_doc),
            n_repetitions=doc.get("n_repetitions", 5),
            base_seed=doc.get("base_seed", 0),
            test_per_class=doc.get("test_per_class", 19),
            decision_threshold=doc.get("decision_threshold", 0.5),
            gate=doc.get("gate", 0.7),
            ce_max_changes=doc.get("ce_max_changes"),
            ce_pool=doc.get("ce_pool", "real_train"),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class RepetitionResult:
    repetition: int
    seed: int
    test_report: MetricsReport
    train_report: MetricsReport
    val_report: MetricsReport
    gap_report: DistributionGapReport
    ce_report: CeReport | None
    augment_report: AugmentReport | None
    fold_metadata: list[dict]
    purity: dict
    class_imbalance: bool
    ensemble_path: str


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    repetitions: list[RepetitionResult]
    failures: list[dict]
    aggregate: dict
    run_dir: str

    def __post_init__(self):
        if len(self.repetitions) + len(self.failures) != self.config.n_repetitions:
            raise ExperimentError("repetition accounting does not add up")


# --------------------------------------------------------------------------
# stages


def augment_training_data(train: Dataset, config: ExperimentConfig, seed: int
                          ) -> tuple[Dataset, AugmentReport | None]:
    if config.pipeline == "no_augment":
        return train, None
    if config.pipeline == "aimen_adasyn":
        cfg = replace(config.augment, method="adasyn", restriction="none", seed=seed)
        return adasyn_balance_loop(train, cfg)
    restriction = _CTGAN_RESTRICTION[config.pipeline]
    cfg = replace(config.augment, method="ctgan", restriction=restriction, seed=seed)
    return gan_three_phase_augment(train, cfg, replace(config.gan, seed=seed))


def purity_audit(test: Dataset, training_inputs: dict[str, Dataset]) -> dict:
    """Exact-vector-match audit: no test record may appear in any dataset a
    model or generator saw.  Raises on violation."""
    test_vectors = test.vector_set()
    overlaps = {name: len(test_vectors & ds.vector_set())
                for name, ds in training_inputs.items()}
    if any(overlaps.values()):
        raise ExperimentError(f"test records leaked into training inputs: {overlaps}")
    return {"test_vectors": len(test_vectors), "overlaps": overlaps, "passed": True}


def _out_of_fold_probs(fold_results, X_scaled: np.ndarray, y: np.ndarray,
                       k: int, seed) -> np.ndarray:
    """Each record scored by the model that held it out for validation."""
    probs = np.empty(len(y))
    for f, val_idx in enumerate(stratified_fold_indices(y, k, seed)):
        probs[val_idx] = forward_batch(fold_results[f].model, X_scaled[val_idx])
    return probs


def _run_repetition(config: ExperimentConfig, data: Dataset, r: int,
                    rep_dir: Path) -> RepetitionResult:
    seed = config.base_seed + r
    train, test = split_balanced_test(data, config.test_per_class, seed=seed)
    augmented, augment_report = augment_training_data(train, config, seed)
    audit = purity_audit(test, {"train_input": train, "augmented": augmented})

    scaler = fit_minmax(augmented)
    X_scaled = transform_minmax(scaler, augmented.X)
    train_cfg = replace(config.train, seed=seed)
    folds = kfold_train(X_scaled, augmented.y, config.backbone_id, train_cfg)
    ensemble = EnsembleModel.from_fold_results(
        folds, scaler, augmented.schema,
        decision_threshold=config.decision_threshold, gate=config.gate)

    test_probs = ensemble.predict_proba_batch(test.X)
    test_report = classification_report(test.y, test_probs, config.decision_threshold)
    train_report = classification_report(
        augmented.y, ensemble.predict_proba_batch(augmented.X),
        config.decision_threshold)
    val_probs = _out_of_fold_probs(folds, X_scaled, augmented.y,
                                   train_cfg.k_folds, train_cfg.seed)
    val_report = classification_report(augmented.y, val_probs,
                                       config.decision_threshold)
    gap_report = distribution_gap([f.val_loss for f in folds],
                                  test_report.bce_loss)

    pool = train if config.ce_pool == "real_train" else augmented
    abnormal = np.flatnonzero(ensemble.predict_labels_batch(test.X) == 1)
    ce_report = None
    if abnormal.size:
        ce_report = evaluate_counterfactuals(
            [test.record(int(i)) for i in abnormal], ensemble, pool,
            config.ce_max_changes)

    neg, pos = augmented.class_counts()
    ensemble_path = "ensemble.json"
    ensemble.save(rep_dir / ensemble_path)
    result = RepetitionResult(
        repetition=r, seed=seed,
        test_report=test_report, train_report=train_report, val_report=val_report,
        gap_report=gap_report, ce_report=ce_report, augment_report=augment_report,
        fold_metadata=list(ensemble.member_metadata), purity=audit,
        class_imbalance=(neg != pos), ensemble_path=ensemble_path)
    _write_repetition_files(result, rep_dir)
    return result


def _dump(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def _write_repetition_files(result: RepetitionResult, rep_dir: Path) -> None:
    _dump(rep_dir / "metrics_test.json", result.test_report.to_json_dict())
    _dump(rep_dir / "metrics_train.json", result.train_report.to_json_dict())
    _dump(rep_dir / "metrics_val.json", result.val_report.to_json_dict())
    _dump(rep_dir / "gap.json", result.gap_report.to_json_dict())
    if result.ce_report is not None:
        _dump(rep_dir / "ce_report.json", result.ce_report.to_json_dict())
    if result.augment_report is not None:
        result.augment_report.save(rep_dir / "augment_report.json")
    _dump(rep_dir / "repetition.json", {
        "repetition": result.repetition,
        "seed": result.seed,
        "error": None,
        "class_imbalance": result.class_imbalance,
        "purity": result.purity,
        "fold_metadata": result.fold_metadata,
        "ensemble_path": result.ensemble_path,
        "ce_report": None if result.ce_report is None
        else result.ce_report.to_json_dict(),
    })


# --------------------------------------------------------------------------
# aggregation


_TABLE3_FIELDS = ("loss", "accuracy", "sensitivity", "specificity",
                  "f1_positive", "f1_negative", "macro_f1")
_TABLE4_FIELDS = ("best_val_loss", "l_val", "l_test", "gap_percent")


def _stats(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def _aggregate_rows(config_doc: dict, rows: list[dict]) -> dict:
    """Shared by the live run and offline recomputation; ``rows`` carry the
    JSON forms of each completed repetition's reports."""
    table3_values = {name: [] for name in _TABLE3_FIELDS}
    table4_values = {name: [] for name in _TABLE4_FIELDS}
    for row in rows:
        test, gap = row["test"], row["gap"]
        table3_values["loss"].append(test["bce_loss"])
        table3_values["accuracy"].append(test["accuracy"])
        table3_values["sensitivity"].append(test["sensitivity"])
        table3_values["specificity"].append(test["specificity"])
        table3_values["f1_positive"].append(test["f1_pos"])
        table3_values["f1_negative"].append(test["f1_neg"])
        table3_values["macro_f1"].append(test["macro_f1"])
        table4_values["best_val_loss"].append(
            min(m["val_loss"] for m in row["fold_metadata"]))
        table4_values["l_val"].append(gap["mean_val_loss"])
        table4_values["l_test"].append(gap["test_loss"])
        table4_values["gap_percent"].append(gap["gap_percent"])
    return {
        "pipeline": config_doc["pipeline"],
        "backbone_id": config_doc["backbone_id"],
        "n_repetitions": config_doc["n_repetitions"],
        "completed_repetitions": len(rows),
        "repetition_seeds": [row["seed"] for row in rows],
        "table3": {name: _stats(vals) for name, vals in table3_values.items()},
        "table4": {name: _stats(vals) for name, vals in table4_values.items()},
    }


def recompute_aggregate(run_dir) -> dict:
    """Rebuild the aggregate purely from files under the run directory."""
    run_dir = Path(run_dir)
    with open(run_dir / "config.json") as fh:
        config_doc = json.load(fh)
    rows, failures = [], []
    for rep_dir in sorted(run_dir.glob("rep_*")):
        with open(rep_dir / "repetition.json") as fh:
            rep_doc = json.load(fh)
        if rep_doc.get("error") is not None:
            failures.append({"repetition": rep_doc["repetition"],
                             "seed": rep_doc["seed"],
                             "error": rep_doc["error"]})
            continue
        with open(rep_dir / "metrics_test.json") as fh:
            test = json.load(fh)
        with open(rep_dir / "gap.json") as fh:
            gap = json.load(fh)
        rows.append({"seed": rep_doc["seed"], "test": test, "gap": gap,
                     "fold_metadata": rep_doc["fold_metadata"]})
    aggregate = _aggregate_rows(config_doc, rows)
    aggregate["failed_repetitions"] = failures
    return aggregate


# --------------------------------------------------------------------------
# driver


def run_experiment(config: ExperimentConfig, data: Dataset, out_dir
                   ) -> ExperimentResult:
    """Run every repetition, recording per-repetition artifacts and failures;
    raises only if no repetition completes."""
    neg, pos = data.class_counts()
    if neg == 0 or pos == 0:
        raise ExperimentError("dataset must contain both classes")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.json")

    repetitions: list[RepetitionResult] = []
    failures: list[dict] = []
    for r in range(config.n_repetitions):
        rep_dir = out / f"rep_{r:02d}"
        rep_dir.mkdir(exist_ok=True)
        try:
            repetitions.append(_run_repetition(config, data, r, rep_dir))
        except Exception as exc:  # recorded; remaining repetitions continue
            failure = {"repetition": r, "seed": config.base_seed + r,
                       "error": f"{type(exc).__name__}: {exc}"}
            failures.append(failure)
            _dump(rep_dir / "repetition.json", failure)
    if not repetitions:
        raise ExperimentError(f"all repetitions failed: {failures}")

    rows = [{"seed": rep.seed, "test": rep.test_report.to_json_dict(),
             "gap": rep.gap_report.to_json_dict(),
             "fold_metadata": rep.fold_metadata} for rep in repetitions]
    aggregate = _aggregate_rows(config.to_json_dict(), rows)
    aggregate["failed_repetitions"] = failures
    _dump(out / "aggregate.json", aggregate)
    return ExperimentResult(config=config, repetitions=repetitions,
                            failures=failures, aggregate=aggregate,
                            run_dir=str(out))
