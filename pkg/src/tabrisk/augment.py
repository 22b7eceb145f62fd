"""Training-set balancing and enlargement: ADASYN, the conditional GAN
three-phase scheme, silhouette gating of generated batches, and value
postprocessing.

Everything here consumes training data only; test sets are never passed in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .data import fit_minmax, transform_minmax
from .gan import GanConfig, GanModel, gan_sample, gan_train
from .schema import CaseRecord, Dataset, FeatureSchema

METHODS = ("adasyn", "ctgan")
RESTRICTIONS = ("none", "negative_only", "both")
POSTPROCESS_MODES = ("float_allow_negative", "float_clamp_nonneg", "round_int")


class AugmentError(RuntimeError):
    pass


@dataclass(frozen=True)
class AugmentConfig:
    method: str = "ctgan"
    size_multiplier: float = 5.0
    min_per_class: int = 5000
    restriction: str = "none"
    silhouette_min: float = 0.3
    postprocess: str = "round_int"
    k_neighbors: int = 5
    batch_size_generated: int = 100
    seed: int = 0
    max_loop_iterations: int = 200
    max_consecutive_discards: int = 50

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.restriction not in RESTRICTIONS:
            raise ValueError(f"restriction must be one of {RESTRICTIONS}")
        if self.postprocess not in POSTPROCESS_MODES:
            raise ValueError(f"postprocess must be one of {POSTPROCESS_MODES}")
        if self.size_multiplier < 1:
            raise ValueError("size_multiplier must be >= 1")
        if not -1.0 < self.silhouette_min < 1.0:
            raise ValueError("silhouette_min must lie in (-1, 1)")
        if self.k_neighbors < 1 or self.batch_size_generated < 1:
            raise ValueError("k_neighbors and batch_size_generated must be >= 1")


@dataclass(frozen=True)
class PhaseCounts:
    name: str
    generated: int
    accepted: int
    discarded: int

    def __post_init__(self):
        if self.accepted + self.discarded != self.generated:
            raise AugmentError(
                f"phase {self.name}: accepted {self.accepted} + discarded "
                f"{self.discarded} != generated {self.generated}")


@dataclass(frozen=True)
class TrajectoryPoint:
    iteration: int
    score: float
    accepted: bool


@dataclass(frozen=True)
class AugmentReport:
    method: str
    restriction: str
    phases: tuple[PhaseCounts, ...]
    initial_class_counts: tuple[int, int]
    final_class_counts: tuple[int, int]
    initial_silhouette: float | None = None
    silhouette_min: float | None = None
    trajectory: tuple[TrajectoryPoint, ...] = ()

    @property
    def total_generated(self) -> int:
        return sum(p.generated for p in self.phases)

    @property
    def total_discarded(self) -> int:
        return sum(p.discarded for p in self.phases)

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "restriction": self.restriction,
            "phases": [{"name": p.name, "generated": p.generated,
                        "accepted": p.accepted, "discarded": p.discarded}
                       for p in self.phases],
            "initial_class_counts": list(self.initial_class_counts),
            "final_class_counts": list(self.final_class_counts),
            "initial_silhouette": self.initial_silhouette,
            "silhouette_min": self.silhouette_min,
            "trajectory": [{"iteration": t.iteration, "score": t.score,
                            "accepted": t.accepted} for t in self.trajectory],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "AugmentReport":
        return cls(
            method=doc["method"], restriction=doc["restriction"],
            phases=tuple(PhaseCounts(**p) for p in doc["phases"]),
            initial_class_counts=tuple(doc["initial_class_counts"]),
            final_class_counts=tuple(doc["final_class_counts"]),
            initial_silhouette=doc.get("initial_silhouette"),
            silhouette_min=doc.get("silhouette_min"),
            trajectory=tuple(TrajectoryPoint(**t) for t in doc.get("trajectory", ())),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def replay_acceptance_decisions(report: AugmentReport) -> list[bool]:
    """Re-derive every accept/discard decision from the recorded trajectory:
    a batch is accepted iff its score beats the last accepted score (starting
    from the pre-augmentation silhouette) or clears the fixed threshold."""
    if report.initial_silhouette is None or report.silhouette_min is None:
        raise AugmentError("report has no silhouette gating information")
    current = report.initial_silhouette
    decisions = []
    for point in report.trajectory:
        accept = point.score > current or point.score > report.silhouette_min
        decisions.append(accept)
        if accept:
            current = point.score
    return decisions


# --------------------------------------------------------------------------
# silhouette


def silhouette_score(points, labels) -> float:
    """Mean silhouette over all points with Euclidean distance.

    a(i) = mean distance to own cluster (excluding self), b(i) = mean
    distance to the other cluster, s(i) = (b-a)/max(a,b).  Singletons score
    0.  Distances use exact per-pair differences (chunked for memory), so
    results are independent of chunking and stable for near-duplicates.
    Squared coordinate gaps below ~1e-154 underflow to zero distance; data
    on measurement scales never gets near that.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise AugmentError("silhouette needs at least 2 points")
    y = np.asarray(labels).ravel()
    if len(y) != len(X):
        raise AugmentError("labels length mismatch")
    classes = np.unique(y)
    if len(classes) < 2:
        raise AugmentError("silhouette needs both classes present")
    if len(classes) > 2:
        raise AugmentError("silhouette is defined here for binary labels")

    mask0 = y == classes[0]
    mask1 = ~mask0
    m0, m1 = int(mask0.sum()), int(mask1.sum())
    n = len(X)

    sum0 = np.empty(n)
    sum1 = np.empty(n)
    # cap the (chunk, n, d) difference tensor at ~200 MB
    chunk = max(1, int(25_000_000 // max(n * X.shape[1], 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = X[start:stop, None, :] - X[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        sum0[start:stop] = dist[:, mask0].sum(axis=1)
        sum1[start:stop] = dist[:, mask1].sum(axis=1)

    own_size = np.where(mask0, m0, m1)
    own_sum = np.where(mask0, sum0, sum1)
    other_size = np.where(mask0, m1, m0)
    other_sum = np.where(mask0, sum1, sum0)

    s = np.zeros(n)
    multi = own_size > 1
    a = np.zeros(n)
    a[multi] = own_sum[multi] / (own_size[multi] - 1)
    b = other_sum / other_size
    denom = np.maximum(a, b)
    ok = multi & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(s.mean())


# --------------------------------------------------------------------------
# ADASYN


def _snap_discrete(schema: FeatureSchema, x: np.ndarray) -> np.ndarray:
    """Snap one-hot blocks to the nearest vertex and binary slots to {0,1}
    so interpolated records stay schema-valid."""
    out = np.array(x, dtype=np.float64)
    binary = schema.binary_slots()
    out[binary] = (out[binary] >= 0.5).astype(np.float64)
    for lo, hi in schema.categorical_blocks():
        block = np.zeros(hi - lo)
        block[int(np.argmax(out[lo:hi]))] = 1.0
        out[lo:hi] = block
    return out


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(quotas).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        frac = quotas - np.floor(quotas)
        top = np.argsort(-frac, kind="stable")[:short]
        base[top] += 1
    return base


def _knn_rows(queries: np.ndarray, pool: np.ndarray, k: int,
              self_index_in_pool: np.ndarray | None = None) -> np.ndarray:
    """Indices (n_queries, k) of each query's k nearest pool rows by squared
    Euclidean distance, computed in chunks via the expansion identity.
    ``self_index_in_pool[q]`` marks a pool row to exclude for query q."""
    pool_sq = (pool * pool).sum(axis=1)
    out = np.empty((len(queries), k), dtype=np.int64)
    chunk = max(1, int(12_000_000 // max(len(pool), 1)))
    for start in range(0, len(queries), chunk):
        stop = min(start + chunk, len(queries))
        q = queries[start:stop]
        d2 = (q * q).sum(axis=1)[:, None] + pool_sq[None, :] - 2.0 * (q @ pool.T)
        if self_index_in_pool is not None:
            rows = np.arange(start, stop)
            d2[rows - start, self_index_in_pool[rows]] = np.inf
        out[start:stop] = np.argpartition(d2, k - 1, axis=1)[:, :k]
    return out


def adasyn_density_allocation(dataset: Dataset, target_class: int, n_new: int,
                              k: int) -> np.ndarray:
    """Per-minority-point synthetic counts, proportional to the fraction of
    opposite-class points among each minority point's k nearest neighbors in
    the full dataset (uniform when every density is zero)."""
    scaler = fit_minmax(dataset)
    S = transform_minmax(scaler, dataset.X)
    minority = np.flatnonzero(dataset.y == target_class)
    neighbors = _knn_rows(S[minority], S, k, self_index_in_pool=minority)
    densities = (dataset.y[neighbors] != target_class).mean(axis=1)
    total = densities.sum()
    if total == 0:
        quotas = np.full(len(minority), n_new / len(minority))
    else:
        quotas = n_new * densities / total
    return _largest_remainder(quotas, n_new)


def adasyn_oversample_traced(dataset: Dataset, target_class: int, n_new: int,
                             k: int = 5, seed=0):
    """Like adasyn_oversample but also returns (seed_index, neighbor_index,
    lambda) construction traces for re-checking the interpolation."""
    if target_class not in (0, 1):
        raise AugmentError("target_class must be 0 or 1")
    minority = np.flatnonzero(dataset.y == target_class)
    majority = np.flatnonzero((dataset.y != target_class) & (dataset.y >= 0))
    if len(minority) < k + 1:
        raise AugmentError(
            f"need at least {k + 1} records of class {target_class}, have {len(minority)}")
    if len(majority) < 1:
        raise AugmentError("need at least one record of the other class")
    if n_new == 0:
        return [], []

    allocation = adasyn_density_allocation(dataset, target_class, n_new, k)
    scaler = fit_minmax(dataset)
    S = transform_minmax(scaler, dataset.X)
    rng = np.random.default_rng(seed)
    schema = dataset.schema

    kk = min(k, len(minority) - 1)
    neighbor_table = _knn_rows(S[minority], S[minority], kk,
                               self_index_in_pool=np.arange(len(minority)))

    records: list[CaseRecord] = []
    traces: list[tuple[int, int, float]] = []
    for row, i in enumerate(minority):
        count = int(allocation[row])
        if count == 0:
            continue
        for _ in range(count):
            z = int(minority[int(rng.choice(neighbor_table[row]))])
            lam = float(rng.uniform())
            x_new = dataset.X[i] + lam * (dataset.X[z] - dataset.X[i])
            records.append(CaseRecord(x=_snap_discrete(schema, x_new), y=target_class))
            traces.append((int(i), z, lam))
    return records, traces


def adasyn_oversample(dataset: Dataset, target_class: int, n_new: int,
                      k: int = 5, seed=0) -> list[CaseRecord]:
    records, _ = adasyn_oversample_traced(dataset, target_class, n_new, k, seed)
    return records


def _class_target(config: AugmentConfig, original_size: int) -> int:
    return max(config.min_per_class,
               math.ceil(config.size_multiplier * original_size / 2))


def adasyn_balance_loop(dataset: Dataset, config: AugmentConfig
                        ) -> tuple[Dataset, AugmentReport]:
    """Alternate (1) positive oversampling to parity with (2) negative
    oversampling inside random subsets where negatives are the minority,
    until both classes reach the size target exactly balanced."""
    neg0, pos0 = dataset.class_counts()
    if neg0 == 0 or pos0 == 0:
        raise AugmentError("both classes must be present")
    target = _class_target(config, len(dataset))
    k = config.k_neighbors
    rng = np.random.default_rng(config.seed)
    current = dataset.subset(np.arange(len(dataset)))
    phases: list[PhaseCounts] = []

    # smallest positive-subset size that leaves floor(0.8 s) >= k + 1
    lo_subset = math.ceil((k + 1) / 0.8) + 1

    for iteration in range(1, config.max_loop_iterations + 1):
        neg, pos = current.class_counts()
        if pos < neg:
            n_new = neg - pos
            recs = adasyn_oversample(current, 1, n_new, k,
                                     seed=int(rng.integers(2 ** 63)))
            recs = postprocess_generated(recs, config.postprocess, current.schema)
            current = current.with_records_added(recs)
            phases.append(PhaseCounts(f"iteration_{iteration}_positive_parity",
                                      n_new, n_new, 0))
        neg, pos = current.class_counts()
        if pos == neg and pos >= target:
            break

        deficit = target - neg
        chunk = min(deficit, max(config.batch_size_generated, -(-deficit // 4)))
        n_pos, pos_idx = pos, np.flatnonzero(current.y == 1)
        neg_idx = np.flatnonzero(current.y == 0)
        if n_pos < lo_subset:
            raise AugmentError(
                f"positive class too small ({n_pos}) for the negative subset step")
        s_pos = int(rng.integers(lo_subset, n_pos + 1))
        s_neg = min(int(0.8 * s_pos), len(neg_idx))
        sub_pos = rng.choice(pos_idx, size=s_pos, replace=False)
        sub_neg = rng.choice(neg_idx, size=s_neg, replace=False)
        subset = current.subset(np.concatenate([sub_neg, sub_pos]))
        recs = adasyn_oversample(subset, 0, chunk, k, seed=int(rng.integers(2 ** 63)))
        recs = postprocess_generated(recs, config.postprocess, current.schema)
        current = current.with_records_added(recs)
        phases.append(PhaseCounts(f"iteration_{iteration}_negative_subset",
                                  chunk, chunk, 0))
    else:
        raise AugmentError(
            f"balance loop did not converge in {config.max_loop_iterations} iterations")

    return current, AugmentReport(
        method="adasyn", restriction="none", phases=tuple(phases),
        initial_class_counts=(neg0, pos0), final_class_counts=current.class_counts())


# --------------------------------------------------------------------------
# postprocessing


def postprocess_generated(records: list[CaseRecord], mode: str,
                          schema: FeatureSchema) -> list[CaseRecord]:
    """float_allow_negative: identity.  float_clamp_nonneg: numeric slots
    clamped to >= 0.  round_int: clamp, then integer-valued numeric slots
    rounded half-away-from-zero."""
    if mode not in POSTPROCESS_MODES:
        raise AugmentError(f"unknown postprocess mode {mode!r}")
    if mode == "float_allow_negative":
        return list(records)
    numeric = schema.numeric_slots()
    integer = schema.integer_slots()
    out = []
    for rec in records:
        x = np.array(rec.x, dtype=np.float64)
        x[numeric] = np.maximum(x[numeric], 0.0)
        if mode == "round_int":
            vals = x[integer]
            x[integer] = np.sign(vals) * np.floor(np.abs(vals) + 0.5)
        out.append(CaseRecord(x=x, y=rec.y))
    return out


# --------------------------------------------------------------------------
# three-phase conditional-GAN augmentation


def gan_three_phase_augment(dataset: Dataset, config: AugmentConfig,
                            gan_config: GanConfig
                            ) -> tuple[Dataset, AugmentReport]:
    """Phase i: positives to parity.  Phase ii: negatives until the total
    size target.  Phase iii: positives to parity again.

    With restriction, each batch for a restricted class joins the dataset
    only if silhouette(current + batch) beats the last accepted score or
    clears silhouette_min; rejected batches are resampled with fresh noise.
    """
    neg0, pos0 = dataset.class_counts()
    if neg0 == 0 or pos0 == 0:
        raise AugmentError("both classes must be present")
    schema = dataset.schema
    total_target = max(2 * config.min_per_class,
                       math.ceil(config.size_multiplier * len(dataset)))

    scaler = fit_minmax(dataset)
    gan = gan_train(dataset, gan_config, scaler=scaler)
    rng = np.random.default_rng(config.seed)

    current = dataset.subset(np.arange(len(dataset)))
    current_scaled = transform_minmax(scaler, current.X)

    gated_classes = {"none": set(), "negative_only": {0}, "both": {0, 1}}[config.restriction]
    ref_score = None
    if gated_classes:
        ref_score = silhouette_score(current_scaled, current.y)
    initial_silhouette = ref_score

    phases: list[PhaseCounts] = []
    trajectory: list[TrajectoryPoint] = []
    iteration = 0

    def deficit(phase: str) -> int:
        neg, pos = current.class_counts()
        if phase == "negative":
            return max(0, total_target - len(current))
        return max(0, neg - pos)

    plan = [("phase_i_positive", 1, "positive"),
            ("phase_ii_negative", 0, "negative"),
            ("phase_iii_positive", 1, "positive")]

    for phase_name, cls, kind in plan:
        generated = accepted = discarded = 0
        consecutive_discards = 0
        while True:
            need = deficit(kind)
            if need == 0:
                break
            n = min(config.batch_size_generated, need)
            recs = gan_sample(gan, cls, n, seed=int(rng.integers(2 ** 63)))
            recs = postprocess_generated(recs, config.postprocess, schema)
            generated += n
            batch_X = np.array([r.x for r in recs])
            batch_scaled = transform_minmax(scaler, batch_X)
            if cls in gated_classes:
                iteration += 1
                cand_points = np.vstack([current_scaled, batch_scaled])
                cand_labels = np.concatenate([current.y, np.full(n, cls)])
                score = silhouette_score(cand_points, cand_labels)
                ok = score > ref_score or score > config.silhouette_min
                trajectory.append(TrajectoryPoint(iteration, score, ok))
                if not ok:
                    discarded += n
                    consecutive_discards += 1
                    if consecutive_discards > config.max_consecutive_discards:
                        raise AugmentError(
                            f"{phase_name}: {consecutive_discards} consecutive "
                            f"batches rejected by the silhouette gate")
                    continue
                ref_score = score
            consecutive_discards = 0
            accepted += n
            current = current.with_records_added(recs)
            current_scaled = np.vstack([current_scaled, batch_scaled])
        phases.append(PhaseCounts(phase_name, generated, accepted, discarded))

    report = AugmentReport(
        method="ctgan", restriction=config.restriction, phases=tuple(phases),
        initial_class_counts=(neg0, pos0), final_class_counts=current.class_counts(),
        initial_silhouette=initial_silhouette,
        silhouette_min=config.silhouette_min if gated_classes else None,
        trajectory=tuple(trajectory))
    return current, report
