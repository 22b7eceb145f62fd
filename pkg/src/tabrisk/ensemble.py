"""F1-gated weighted voting over fold models.

A member votes only when its validation F1 clears the gate (strictly);
qualified members are weighted by their F1.  If nobody qualifies the
ensemble degrades to an unweighted mean and flags it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import ScalerParams, transform_minmax
from .nn import MlpModel, forward_batch
from .schema import FeatureSchema

DEFAULT_GATE = 0.7
DEFAULT_THRESHOLD = 0.5


class EnsembleError(ValueError):
    pass


def assign_voting_weights(val_f1s, gate: float = DEFAULT_GATE) -> tuple[list[float], bool]:
    """alpha_i = F1_i if F1_i > gate else 0 (strict).

    Returns (alphas, fallback).  When every member is disqualified the
    weights degrade to uniform 1/k and ``fallback`` is True.
    """
    f1s = [float(v) for v in val_f1s]
    if not f1s:
        raise EnsembleError("no validation F1 scores")
    if any(not 0.0 <= v <= 1.0 for v in f1s):
        raise EnsembleError("F1 scores must lie in [0, 1]")
    alphas = [v if v > gate else 0.0 for v in f1s]
    if all(a == 0.0 for a in alphas):
        return [1.0 / len(f1s)] * len(f1s), True
    return alphas, False


def classify(p: float, threshold: float = DEFAULT_THRESHOLD) -> int:
    """1 iff p >= threshold."""
    return 1 if p >= threshold else 0


@dataclass
class EnsembleModel:
    """Immutable after construction; inputs are raw-unit encoded vectors —
    the stored scaler is applied before every member forward pass."""

    members: list[MlpModel]
    alphas: list[float]
    scaler: ScalerParams
    schema: FeatureSchema
    decision_threshold: float = DEFAULT_THRESHOLD
    gate: float = DEFAULT_GATE
    fallback_uniform: bool = False
    member_metadata: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if len(self.members) != len(self.alphas):
            raise EnsembleError(
                f"{len(self.members)} members but {len(self.alphas)} weights")
        if not self.members:
            raise EnsembleError("ensemble needs at least one member")
        if any(a < 0 for a in self.alphas):
            raise EnsembleError("voting weights must be non-negative")
        if sum(self.alphas) <= 0:
            raise EnsembleError("at least one voting weight must be positive")

    @classmethod
    def from_fold_results(cls, fold_results, scaler: ScalerParams,
                          schema: FeatureSchema,
                          decision_threshold: float = DEFAULT_THRESHOLD,
                          gate: float = DEFAULT_GATE) -> "EnsembleModel":
        alphas, fallback = assign_voting_weights(
            [r.val_macro_f1 for r in fold_results], gate)
        meta = [{"fold_index": r.fold_index, "val_macro_f1": r.val_macro_f1,
                 "val_loss": r.val_loss, "epochs_run": r.epochs_run}
                for r in fold_results]
        return cls(members=[r.model for r in fold_results], alphas=alphas,
                   scaler=scaler, schema=schema, decision_threshold=decision_threshold,
                   gate=gate, fallback_uniform=fallback, member_metadata=meta)

    # ----------------------------------------------------------- inference

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.schema.d:
            raise EnsembleError(f"expected (n, {self.schema.d}) input, got {X.shape}")
        scaled = transform_minmax(self.scaler, X)
        total = np.zeros(X.shape[0])
        weight_sum = 0.0
        for model, alpha in zip(self.members, self.alphas):
            if alpha == 0.0:
                continue
            total += alpha * forward_batch(model, scaled)
            weight_sum += alpha
        return total / weight_sum

    def predict_proba(self, x: np.ndarray) -> float:
        return float(self.predict_proba_batch(
            np.asarray(x, dtype=np.float64).reshape(1, -1))[0])

    def predict_label(self, x: np.ndarray) -> int:
        return classify(self.predict_proba(x), self.decision_threshold)

    def predict_labels_batch(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba_batch(X) >= self.decision_threshold).astype(np.int64)

    # -------------------------------------------------------- serialization

    def to_json_dict(self) -> dict:
        return {
            "members": [m.to_json_dict() for m in self.members],
            "alphas": list(self.alphas),
            "scaler": self.scaler.to_json_dict(),
            "schema": self.schema.to_json_dict(),
            "decision_threshold": self.decision_threshold,
            "gate": self.gate,
            "fallback_uniform": self.fallback_uniform,
            "member_metadata": self.member_metadata,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EnsembleModel":
        return cls(
            members=[MlpModel.from_json_dict(m) for m in doc["members"]],
            alphas=[float(a) for a in doc["alphas"]],
            scaler=ScalerParams.from_json_dict(doc["scaler"]),
            schema=FeatureSchema.from_json_dict(doc["schema"]),
            decision_threshold=float(doc.get("decision_threshold", DEFAULT_THRESHOLD)),
            gate=float(doc.get("gate", DEFAULT_GATE)),
            fallback_uniform=bool(doc.get("fallback_uniform", False)),
            member_metadata=doc.get("member_metadata", []),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "EnsembleModel":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def ensemble_predict_proba(ensemble: EnsembleModel, x: np.ndarray) -> float:
    """Weighted mean p = sum(alpha_i * f_i(x)) / sum(alpha_i) on a raw-unit
    encoded vector."""
    return ensemble.predict_proba(x)
