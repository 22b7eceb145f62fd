"""Evaluation formulas: confusion counts, rate metrics, BCE, ROC/AUROC,
threshold sweeps and the validation/test distribution gap.

All operations are pure functions over plain sequences/arrays.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

BCE_CLIP = 1e-7


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise MetricsError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_json_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ConfusionCounts":
        return cls(tp=doc["tp"], tn=doc["tn"], fp=doc["fp"], fn=doc["fn"])


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    accuracy: float
    sensitivity: float
    specificity: float
    ppv: float
    npv: float
    f1_pos: float
    f1_neg: float
    macro_f1: float
    auroc: float
    bce_loss: float
    threshold: float
    degenerate_rates: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "counts": self.counts.to_json_dict(),
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "ppv": self.ppv,
            "npv": self.npv,
            "f1_pos": self.f1_pos,
            "f1_neg": self.f1_neg,
            "macro_f1": self.macro_f1,
            "auroc": self.auroc,
            "bce_loss": self.bce_loss,
            "threshold": self.threshold,
            "degenerate_rates": list(self.degenerate_rates),
        }


@dataclass(frozen=True)
class RocCurve:
    """Points sorted by ascending threshold; always covers the (1,1) and
    (0,0) corners of (fpr, tpr) space."""

    thresholds: tuple[float, ...]
    tpr: tuple[float, ...]
    fpr: tuple[float, ...]

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["threshold", "tpr", "fpr"])
        for t, tp, fp in zip(self.thresholds, self.tpr, self.fpr):
            writer.writerow([repr(t), repr(tp), repr(fp)])
        return buf.getvalue()

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_string())

    def to_json_dict(self) -> dict:
        return {"thresholds": list(self.thresholds), "tpr": list(self.tpr),
                "fpr": list(self.fpr)}


@dataclass(frozen=True)
class DistributionGapReport:
    fold_val_losses: tuple[float, ...]
    mean_val_loss: float
    test_loss: float
    gap_percent: float

    def to_json_dict(self) -> dict:
        return {
            "fold_val_losses": list(self.fold_val_losses),
            "mean_val_loss": self.mean_val_loss,
            "test_loss": self.test_loss,
            "gap_percent": self.gap_percent,
        }


def _as_binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size == 0:
        raise MetricsError(f"empty {name}")
    if not np.isin(arr, (0, 1)).all():
        raise MetricsError(f"{name} must contain only 0/1 values")
    return arr.astype(np.int64).ravel()


def _as_probs(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise MetricsError("empty probabilities")
    if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
        raise MetricsError("probabilities must lie in [0, 1]")
    return arr


def confusion(labels, preds) -> ConfusionCounts:
    y = _as_binary(labels, "labels")
    p = _as_binary(preds, "predictions")
    if len(y) != len(p):
        raise MetricsError(f"length mismatch: {len(y)} labels vs {len(p)} predictions")
    return ConfusionCounts(
        tp=int(np.sum((y == 1) & (p == 1))),
        tn=int(np.sum((y == 0) & (p == 0))),
        fp=int(np.sum((y == 0) & (p == 1))),
        fn=int(np.sum((y == 1) & (p == 0))),
    )


def _safe_rate(num: int, den: int, name: str, degenerate: list[str]) -> float:
    if den == 0:
        degenerate.append(name)
        return 0.0
    return num / den


def rates_from_counts(counts: ConfusionCounts) -> tuple[dict, list[str]]:
    """All rate metrics from a confusion matrix; zero-denominator rates come
    back as 0.0 and are listed by name."""
    degenerate: list[str] = []
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    out = {
        "accuracy": _safe_rate(tp + tn, counts.total, "accuracy", degenerate),
        "sensitivity": _safe_rate(tp, tp + fn, "sensitivity", degenerate),
        "specificity": _safe_rate(tn, tn + fp, "specificity", degenerate),
        "ppv": _safe_rate(tp, tp + fp, "ppv", degenerate),
        "npv": _safe_rate(tn, tn + fn, "npv", degenerate),
        "f1_pos": _safe_rate(2 * tp, 2 * tp + fp + fn, "f1_pos", degenerate),
        "f1_neg": _safe_rate(2 * tn, 2 * tn + fn + fp, "f1_neg", degenerate),
    }
    out["macro_f1"] = (out["f1_pos"] + out["f1_neg"]) / 2
    return out, degenerate


def bce(labels, probs) -> float:
    """Mean negated log-likelihood with probabilities clipped to
    [1e-7, 1 - 1e-7]."""
    y = _as_binary(labels, "labels")
    p = _as_probs(probs)
    if len(y) != len(p):
        raise MetricsError(f"length mismatch: {len(y)} labels vs {len(p)} probabilities")
    p = np.clip(p, BCE_CLIP, 1.0 - BCE_CLIP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def auroc(labels, scores) -> float:
    """Trapezoidal area under the ROC over all distinct score thresholds.

    Equals the tie-corrected pair-counting estimate exactly: cumulative
    tp/fp counts are integers, so the doubled area is accumulated as an
    exact integer before the single final division.
    """
    y = _as_binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64).ravel()
    if len(y) != len(s):
        raise MetricsError(f"length mismatch: {len(y)} labels vs {len(s)} scores")
    if not np.isfinite(s).all():
        raise MetricsError("scores must be finite")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("auroc requires both classes present")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # group boundaries between distinct scores
    boundaries = np.flatnonzero(np.diff(s_sorted) != 0)
    stops = np.append(boundaries + 1, len(s_sorted))
    cum_tp = np.cumsum(y_sorted)
    cum_fp = np.cumsum(1 - y_sorted)
    twice_area = 0
    prev_tp = prev_fp = 0
    for stop in stops:
        tp = int(cum_tp[stop - 1])
        fp = int(cum_fp[stop - 1])
        twice_area += (fp - prev_fp) * (tp + prev_tp)
        prev_tp, prev_fp = tp, fp
    return twice_area / (2 * n_pos * n_neg)


def classification_report(labels, probs, threshold: float, *,
                          include_auroc: bool = True) -> MetricsReport:
    """Threshold at ``p >= threshold``, then every rate formula, plus AUROC
    and BCE of the raw probabilities."""
    y = _as_binary(labels, "labels")
    p = _as_probs(probs)
    if len(y) != len(p):
        raise MetricsError(f"length mismatch: {len(y)} labels vs {len(p)} probabilities")
    preds = (p >= threshold).astype(np.int64)
    counts = confusion(y, preds)
    rates, degenerate = rates_from_counts(counts)
    if include_auroc and 0 < y.sum() < len(y):
        auc = auroc(y, p)
    else:
        auc = 0.0
        degenerate.append("auroc")
    return MetricsReport(counts=counts, auroc=auc, bce_loss=bce(y, p),
                         threshold=float(threshold),
                         degenerate_rates=tuple(degenerate), **rates)


def roc_sweep(labels, probs, thresholds) -> tuple[RocCurve, list[MetricsReport]]:
    """One confusion/report per threshold.  Sentinel thresholds are appended
    when the supplied grid does not reach the all-positive (1,1) and
    all-negative (0,0) corners."""
    y = _as_binary(labels, "labels")
    p = _as_probs(probs)
    grid = [float(t) for t in thresholds]
    if not grid:
        raise MetricsError("empty threshold list")
    if 0.0 not in grid:
        grid.append(0.0)  # p >= 0 always: the (1,1) corner
    if not any(t > 1.0 for t in grid):
        grid.append(np.nextafter(1.0, 2.0))  # nothing predicted positive: (0,0)
    grid = sorted(set(grid))

    reports = [classification_report(y, p, t) for t in grid]
    tpr, fpr = [], []
    for rep in reports:
        c = rep.counts
        tpr.append(c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 0.0)
        fpr.append(c.fp / (c.fp + c.tn) if (c.fp + c.tn) else 0.0)
    curve = RocCurve(thresholds=tuple(grid), tpr=tuple(tpr), fpr=tuple(fpr))
    return curve, reports


def distribution_gap(fold_val_losses, test_loss: float) -> DistributionGapReport:
    """Percent excess of test loss over the mean validation-fold loss:
    (L_test - L_val) / L_val * 100."""
    losses = tuple(float(v) for v in fold_val_losses)
    if not losses:
        raise MetricsError("no fold validation losses")
    if any(v < 0 for v in losses) or test_loss < 0:
        raise MetricsError("losses must be non-negative")
    mean_val = float(np.mean(losses))
    if mean_val <= 0:
        raise MetricsError("mean validation loss must be positive")
    gap = (float(test_loss) - mean_val) / mean_val * 100.0
    return DistributionGapReport(fold_val_losses=losses, mean_val_loss=mean_val,
                                 test_loss=float(test_loss), gap_percent=gap)
