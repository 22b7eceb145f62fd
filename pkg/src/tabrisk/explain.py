"""Counterfactual explanations and feature attribution.

Counterfactuals follow the nearest-unlike-instance recipe: find the closest
pool record the model classifies as the opposite class (min-max-scaled
Euclidean distance), then greedily copy one feature at a time from that
neighbor — always the substitution that moves the model probability furthest
toward the opposite class — until the classification flips or the change
budget runs out.  Copying every feature reaches the neighbor itself, so an
unbounded budget always flips.

Attribution is Monte-Carlo permutation Shapley: marginal probability changes
when a feature switches from a background draw to the query value, averaged
over random feature orderings.  A categorical one-hot block moves as one
feature in both procedures.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data import transform_minmax
from .ensemble import EnsembleModel, classify
from .schema import CaseRecord, Dataset, FeatureSchema


class ExplainError(RuntimeError):
    """Raised when an explanation cannot be produced."""


# --------------------------------------------------------------------------
# counterfactuals


@dataclass(frozen=True)
class GreedyStep:
    feature: str
    prob: float


@dataclass(frozen=True)
class Counterfactual:
    original: CaseRecord
    counterfactual: CaseRecord
    changed_features: tuple[str, ...]
    distance: float
    original_prob: float
    counterfactual_prob: float
    flipped: bool
    trace: tuple[GreedyStep, ...] = ()

    @property
    def sparsity(self) -> int:
        return len(self.changed_features)


@dataclass(frozen=True)
class CeReport:
    accuracy: float
    distance_mean: float
    distance_std: float
    sparsity_mean: float
    sparsity_std: float
    n_cases: int

    def to_json_dict(self) -> dict:
        return {"accuracy": self.accuracy,
                "distance_mean": self.distance_mean,
                "distance_std": self.distance_std,
                "sparsity_mean": self.sparsity_mean,
                "sparsity_std": self.sparsity_std,
                "n_cases": self.n_cases}


def _feature_slots(schema: FeatureSchema) -> list[tuple[str, int, int]]:
    return [(f.name, *schema.slot_range(f.name)) for f in schema.features]


def differing_features(schema: FeatureSchema, a: np.ndarray, b: np.ndarray
                       ) -> tuple[str, ...]:
    """Names of features whose encoded slots differ (a one-hot block counts
    as a single feature)."""
    return tuple(name for name, lo, hi in _feature_slots(schema)
                 if not np.array_equal(a[lo:hi], b[lo:hi]))


def scaled_distance(model: EnsembleModel, a: np.ndarray, b: np.ndarray) -> float:
    sa = transform_minmax(model.scaler, np.asarray(a, dtype=np.float64))
    sb = transform_minmax(model.scaler, np.asarray(b, dtype=np.float64))
    return float(np.sqrt(((sa - sb) ** 2).sum()))


def nearest_unlike_neighbor(x: CaseRecord, pool: Dataset,
                            model: EnsembleModel) -> CaseRecord:
    """Pool record with minimal scaled Euclidean distance among those the
    model classifies opposite to x; distance ties break to the lowest pool
    index."""
    if len(pool) == 0:
        raise ExplainError("empty neighbor pool")
    own = model.predict_label(x.x)
    labels = model.predict_labels_batch(pool.X)
    unlike = np.flatnonzero(labels != own)
    if unlike.size == 0:
        raise ExplainError("no pool record is classified as the opposite class")
    sx = transform_minmax(model.scaler, x.x)
    sp = transform_minmax(model.scaler, pool.X[unlike])
    d2 = ((sp - sx) ** 2).sum(axis=1)
    return pool.record(int(unlike[int(np.argmin(d2))]))


def generate_counterfactual(x: CaseRecord, model: EnsembleModel, pool: Dataset,
                            max_changes: int | None = None) -> Counterfactual:
    """Greedy single-feature substitution from the nearest unlike neighbor.

    Each step tries every still-differing feature, keeps the substitution
    whose probability lies furthest toward the opposite class (ties: first
    in schema order), and stops on flip or after ``max_changes`` steps.
    ``max_changes=None`` means the full feature count, which always flips.
    """
    schema = model.schema
    if max_changes is None:
        max_changes = schema.n_features
    if max_changes < 0:
        raise ExplainError("max_changes must be >= 0")

    p0 = model.predict_proba(x.x)
    own = classify(p0, model.decision_threshold)
    neighbor = nearest_unlike_neighbor(x, pool, model)
    sign = -1.0 if own == 1 else 1.0  # direction that approaches the flip

    current = np.array(x.x, dtype=np.float64)
    p_cur = p0
    trace: list[GreedyStep] = []
    slots = _feature_slots(schema)

    for _ in range(max_changes):
        if classify(p_cur, model.decision_threshold) != own:
            break
        candidates = [(name, lo, hi) for name, lo, hi in slots
                      if not np.array_equal(current[lo:hi], neighbor.x[lo:hi])]
        if not candidates:
            break
        trials = np.tile(current, (len(candidates), 1))
        for row, (_, lo, hi) in enumerate(candidates):
            trials[row, lo:hi] = neighbor.x[lo:hi]
        probs = model.predict_proba_batch(trials)
        best = int(np.argmax(sign * probs))
        name, lo, hi = candidates[best]
        current[lo:hi] = neighbor.x[lo:hi]
        p_cur = float(probs[best])
        trace.append(GreedyStep(name, p_cur))

    # the stored probability comes from the same single-row path later
    # predictions use, so round-trip checks see the identical value
    p_final = model.predict_proba(current) if trace else p0
    flipped = classify(p_final, model.decision_threshold) != own
    return Counterfactual(
        original=x,
        counterfactual=CaseRecord(x=current, y=1 - own if flipped else own),
        changed_features=differing_features(schema, x.x, current),
        distance=scaled_distance(model, x.x, current),
        original_prob=p0,
        counterfactual_prob=p_final,
        flipped=flipped,
        trace=tuple(trace))


def summarize_counterfactuals(cfs: list[Counterfactual]) -> CeReport:
    """Accuracy = fraction flipped; distance/sparsity statistics use the
    population standard deviation."""
    if not cfs:
        raise ExplainError("no counterfactuals to summarize")
    dist = np.array([c.distance for c in cfs], dtype=np.float64)
    spars = np.array([c.sparsity for c in cfs], dtype=np.float64)
    return CeReport(
        accuracy=float(np.mean([c.flipped for c in cfs])),
        distance_mean=float(dist.mean()), distance_std=float(dist.std()),
        sparsity_mean=float(spars.mean()), sparsity_std=float(spars.std()),
        n_cases=len(cfs))


def evaluate_counterfactuals(cases: list[CaseRecord], model: EnsembleModel,
                             pool: Dataset, max_changes: int | None = None
                             ) -> CeReport:
    if not cases:
        raise ExplainError("no cases to evaluate")
    return summarize_counterfactuals(
        [generate_counterfactual(c, model, pool, max_changes) for c in cases])


def counterfactual_to_json_dict(cf: Counterfactual, schema: FeatureSchema) -> dict:
    return {
        "original": schema.decode_vector(cf.original.x),
        "counterfactual": schema.decode_vector(cf.counterfactual.x),
        "changed_features": list(cf.changed_features),
        "distance": cf.distance,
        "original_prob": cf.original_prob,
        "counterfactual_prob": cf.counterfactual_prob,
        "flipped": cf.flipped,
        "trace": [{"feature": s.feature, "prob": s.prob} for s in cf.trace],
    }


def save_counterfactuals(cfs: list[Counterfactual], schema: FeatureSchema,
                         path) -> None:
    with open(path, "w") as fh:
        json.dump([counterfactual_to_json_dict(c, schema) for c in cfs],
                  fh, indent=2)


# --------------------------------------------------------------------------
# Shapley attribution


@dataclass(frozen=True)
class Attribution:
    features: tuple[str, ...]
    values: tuple[float, ...]
    std_errors: tuple[float, ...]
    baseline: float
    prediction: float
    efficiency_residual: float
    n_samples: int

    def to_json_dict(self) -> dict:
        return {
            "features": list(self.features),
            "values": list(self.values),
            "std_errors": list(self.std_errors),
            "baseline": self.baseline,
            "prediction": self.prediction,
            "efficiency_residual": self.efficiency_residual,
            "n_samples": self.n_samples,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "value"])
            for name, value in zip(self.features, self.values):
                writer.writerow([name, repr(value)])


def shapley_attribution_for_fn(predict_fn, schema: FeatureSchema,
                               x: np.ndarray, background_X: np.ndarray,
                               n_samples: int, seed) -> Attribution:
    """Permutation-sampling Shapley estimate for any batch probability
    function.

    Each sample draws one background row and one feature ordering, then
    walks the ordering switching features from the background value to the
    query value; the probability change at each switch is that feature's
    marginal.  Marginals telescope to f(x) - f(background draw) per sample,
    so the attribution sum approaches f(x) - baseline as samples grow.
    """
    if n_samples < 1:
        raise ExplainError("n_samples must be >= 1")
    background_X = np.asarray(background_X, dtype=np.float64)
    if background_X.ndim != 2 or len(background_X) == 0:
        raise ExplainError("background must be a non-empty (n, d) array")
    x = np.asarray(x, dtype=np.float64)
    slots = _feature_slots(schema)
    n_feat = len(slots)

    rng = np.random.default_rng(seed)
    draws = rng.integers(len(background_X), size=n_samples)
    orders = np.argsort(rng.random((n_samples, n_feat)), axis=1, kind="stable")

    Z = background_X[draws].copy()
    marginals = np.empty((n_samples, n_feat))
    p_prev = np.asarray(predict_fn(Z), dtype=np.float64)
    rows = np.arange(n_samples)
    for step in range(n_feat):
        feat_at_step = orders[:, step]
        for j, (_, lo, hi) in enumerate(slots):
            hit = feat_at_step == j
            if hit.any():
                Z[hit, lo:hi] = x[lo:hi]
        p_new = np.asarray(predict_fn(Z), dtype=np.float64)
        marginals[rows, feat_at_step] = p_new - p_prev
        p_prev = p_new

    values = marginals.mean(axis=0)
    if n_samples > 1:
        std_errors = marginals.std(axis=0, ddof=1) / np.sqrt(n_samples)
    else:
        std_errors = np.zeros(n_feat)
    baseline = float(np.mean(predict_fn(background_X)))
    prediction = float(np.asarray(predict_fn(x.reshape(1, -1)))[0])
    residual = float(values.sum() - (prediction - baseline))
    return Attribution(
        features=tuple(name for name, _, _ in slots),
        values=tuple(float(v) for v in values),
        std_errors=tuple(float(s) for s in std_errors),
        baseline=baseline, prediction=prediction,
        efficiency_residual=residual, n_samples=n_samples)


def shapley_attribution(model: EnsembleModel, x: CaseRecord, background: Dataset,
                        n_samples: int, seed) -> Attribution:
    if len(background) == 0:
        raise ExplainError("background must be a non-empty (n, d) array")
    return shapley_attribution_for_fn(
        model.predict_proba_batch, model.schema, x.x, background.X,
        n_samples, seed)
