"""Augmentation against brute-force oracles: O(n^2) silhouette, exhaustive
k-NN density counts, interpolation-geometry recomputation, and trajectory
replay of the silhouette gate."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabrisk.augment import (
    AugmentConfig,
    AugmentError,
    AugmentReport,
    PhaseCounts,
    TrajectoryPoint,
    adasyn_balance_loop,
    adasyn_density_allocation,
    adasyn_oversample,
    adasyn_oversample_traced,
    gan_three_phase_augment,
    postprocess_generated,
    replay_acceptance_decisions,
    silhouette_score,
)
from tabrisk.gan import GanConfig
from tabrisk.schema import CaseRecord, Dataset, FeatureSchema, binary, categorical, numeric


# ---------------------------------------------------------------- fixtures


def plane_schema():
    return FeatureSchema(features=(numeric("u", -1000, 1000), numeric("v", -1000, 1000)),
                         outcome_name="y")


def plane_dataset(X, y):
    X = np.asarray(X, dtype=np.float64)
    ds = Dataset(schema=plane_schema(), X=X, y=np.asarray(y, dtype=np.int64),
                 provenance=["real"] * len(X))
    return ds


def blob_dataset(n_neg, n_pos, seed=0, gap=6.0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0.0, 1.0, size=(n_neg, 2)),
                   rng.normal(gap, 1.0, size=(n_pos, 2))])
    y = np.array([0] * n_neg + [1] * n_pos)
    return plane_dataset(X, y)


# ---------------------------------------------------------------- oracles


def silhouette_oracle(points, labels):
    """Textbook O(n^2) with per-pair math.dist; no shared code."""
    pts = [list(map(float, p)) for p in points]
    n = len(pts)
    scores = []
    for i in range(n):
        same = [j for j in range(n) if labels[j] == labels[i] and j != i]
        other = [j for j in range(n) if labels[j] != labels[i]]
        if not same:
            scores.append(0.0)
            continue
        a = sum(math.dist(pts[i], pts[j]) for j in same) / len(same)
        b = sum(math.dist(pts[i], pts[j]) for j in other) / len(other)
        m = max(a, b)
        scores.append(0.0 if m == 0 else (b - a) / m)
    return sum(scores) / n


def density_oracle(X_scaled, y, target_class, k):
    """Exhaustive k-NN opposite-class fractions for each minority point."""
    minority = [i for i in range(len(y)) if y[i] == target_class]
    out = []
    for i in minority:
        dists = sorted((math.dist(X_scaled[i], X_scaled[j]), j)
                       for j in range(len(y)) if j != i)
        neigh = [j for _, j in dists[:k]]
        out.append(sum(1 for j in neigh if y[j] != target_class) / k)
    return out


# -------------------------------------------------------------- silhouette


def test_silhouette_well_separated_clusters():
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(0, 0.5, size=(40, 2)),
                     rng.normal(100, 0.5, size=(40, 2))])
    labels = [0] * 40 + [1] * 40
    assert silhouette_score(pts, labels) > 0.95


def test_silhouette_random_labels_near_zero():
    rng = np.random.default_rng(1)
    pts = rng.normal(0, 1, size=(200, 2))
    labels = rng.integers(0, 2, 200)
    labels[:2] = [0, 1]
    assert abs(silhouette_score(pts, labels)) < 0.2


def test_silhouette_six_point_hand_case():
    pts = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (4.0, 4.0), (5.0, 4.0), (4.0, 5.0)]
    labels = [0, 0, 1, 1, 1, 0]
    got = silhouette_score(pts, labels)
    want = silhouette_oracle(pts, labels)
    assert abs(got - want) < 1e-12


def test_silhouette_matches_oracle_randomized():
    rng = np.random.default_rng(3)
    for trial in range(30):
        n = int(rng.integers(2, 120))
        d = int(rng.integers(1, 6))
        pts = rng.normal(0, 2, size=(n, d))
        labels = rng.integers(0, 2, n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        assert abs(silhouette_score(pts, labels)
                   - silhouette_oracle(pts, labels)) < 1e-12, trial


def test_silhouette_singleton_cluster_counts_zero():
    pts = [(0.0, 0.0), (0.1, 0.0), (5.0, 5.0)]
    labels = [0, 0, 1]
    assert abs(silhouette_score(pts, labels) - silhouette_oracle(pts, labels)) < 1e-12


def test_silhouette_duplicate_points():
    pts = [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (2.0, 2.0)]
    labels = [0, 0, 1, 1]
    assert abs(silhouette_score(pts, labels) - silhouette_oracle(pts, labels)) < 1e-12


coord = st.floats(-50, 50).map(lambda v: float(np.float32(v)))


@given(st.lists(st.tuples(coord, coord, st.integers(0, 1)),
                min_size=2, max_size=40))
@settings(max_examples=60, deadline=None)
def test_silhouette_oracle_property(rows):
    labels = [r[2] for r in rows]
    if len(set(labels)) < 2:
        rows = rows + [(0.0, 0.0, 1 - labels[0])]
        labels = [r[2] for r in rows]
    pts = [(r[0], r[1]) for r in rows]
    got = silhouette_score(pts, labels)
    assert abs(got - silhouette_oracle(pts, labels)) < 1e-12
    assert -1.0 <= got <= 1.0


def test_silhouette_errors():
    with pytest.raises(AugmentError):
        silhouette_score([(0.0, 0.0)], [0])
    with pytest.raises(AugmentError):
        silhouette_score([(0.0, 0.0), (1.0, 1.0)], [1, 1])


# ------------------------------------------------------------------ adasyn


def test_adasyn_lambda_zero_equals_seed_point():
    ds = blob_dataset(30, 8, seed=5)
    records, traces = adasyn_oversample_traced(ds, 1, 40, k=3, seed=9)
    for rec, (i, z, lam) in zip(records, traces):
        if lam < 1e-9:
            assert np.allclose(rec.x, ds.X[i], atol=1e-12)
    # construction invariant holds for every record on numeric slots
    for rec, (i, z, lam) in zip(records, traces):
        want = ds.X[i] + lam * (ds.X[z] - ds.X[i])
        assert np.array_equal(rec.x, want)  # all-numeric schema: no snapping


def test_adasyn_output_on_segment_and_labels():
    ds = blob_dataset(25, 10, seed=2)
    records, traces = adasyn_oversample_traced(ds, 1, 50, k=5, seed=3)
    assert len(records) == 50
    for rec, (i, z, lam) in zip(records, traces):
        assert rec.y == 1
        assert 0.0 <= lam <= 1.0
        lo = np.minimum(ds.X[i], ds.X[z])
        hi = np.maximum(ds.X[i], ds.X[z])
        assert (rec.x >= lo - 1e-12).all() and (rec.x <= hi + 1e-12).all()
        # seeds and neighbors both come from the minority class
        assert ds.y[i] == 1 and ds.y[z] == 1


def test_adasyn_allocation_matches_density_oracle():
    ds = blob_dataset(14, 6, seed=7, gap=2.0)  # overlapping blobs -> mixed densities
    k = 4
    allocation = adasyn_density_allocation(ds, 1, 50, k)
    mins, maxs = ds.X.min(axis=0), ds.X.max(axis=0)
    span = np.where(maxs > mins, maxs - mins, 1.0)
    S = (ds.X - mins) / span
    oracle = density_oracle(S, ds.y.tolist(), 1, k)
    total = sum(oracle)
    want = [50 * r / total for r in oracle]
    # largest-remainder apportionment of the oracle quotas
    base = [int(q) for q in (math.floor(q) for q in want)]
    rem = 50 - sum(base)
    fracs = sorted(range(len(want)), key=lambda i: (-(want[i] - math.floor(want[i])), i))
    for i in fracs[:rem]:
        base[i] += 1
    assert allocation.tolist() == base
    assert allocation.sum() == 50


def test_adasyn_uniform_fallback_when_no_majority_neighbors():
    # minority points tightly clustered far from majority: all densities zero
    X = np.vstack([np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1],
                             [0.05, 0.05], [0.02, 0.08]]) ,
                   np.array([[900.0, 900.0], [901.0, 900.0]])])
    y = np.array([1, 1, 1, 1, 1, 1, 0, 0])
    ds = plane_dataset(X, y)
    allocation = adasyn_density_allocation(ds, 1, 12, k=3)
    assert allocation.tolist() == [2, 2, 2, 2, 2, 2]


def test_adasyn_convex_hull_numeric_bounds():
    ds = blob_dataset(20, 10, seed=11)
    records = adasyn_oversample(ds, 1, 50, k=5, seed=4)
    minority = ds.X[ds.y == 1]
    lo, hi = minority.min(axis=0), minority.max(axis=0)
    for rec in records:
        assert (rec.x >= lo - 1e-12).all() and (rec.x <= hi + 1e-12).all()


def test_adasyn_zero_request_and_errors():
    ds = blob_dataset(10, 6, seed=0)
    assert adasyn_oversample(ds, 1, 0, k=3, seed=0) == []
    with pytest.raises(AugmentError):
        adasyn_oversample(ds, 1, 5, k=6, seed=0)  # k+1 > minority count
    single = plane_dataset(np.zeros((4, 2)), [1, 1, 1, 1])
    with pytest.raises(AugmentError):
        adasyn_oversample(single, 1, 5, k=2, seed=0)


def test_adasyn_snaps_discrete_slots():
    schema = FeatureSchema(
        features=(numeric("n", 0, 10), binary("b"), categorical("c", ("p", "q"))),
        outcome_name="y")
    rows = ([{"n": i * 0.7, "b": i % 2, "c": "p" if i % 3 else "q"} for i in range(8)]
            + [{"n": 9.0, "b": 1, "c": "q"} for _ in range(3)])
    ds = Dataset.from_rows(schema, rows, labels=[1] * 8 + [0] * 3)
    records = adasyn_oversample(ds, 1, 30, k=3, seed=1)
    for rec in records:
        assert rec.x[1] in (0.0, 1.0)
        assert sorted(rec.x[2:4]) in ([0.0, 1.0],)


# ------------------------------------------------------------ balance loop


def small_loop_config(**kw):
    defaults = dict(method="adasyn", size_multiplier=2.0, min_per_class=300,
                    postprocess="float_allow_negative", k_neighbors=5,
                    batch_size_generated=50, seed=0)
    defaults.update(kw)
    return AugmentConfig(**defaults)


def test_balance_loop_reaches_balanced_target():
    ds = blob_dataset(186, 14, seed=1)
    out, report = adasyn_balance_loop(ds, small_loop_config())
    neg, pos = out.class_counts()
    assert neg == pos
    assert pos >= 300
    assert len(out) >= 2.0 * len(ds)
    assert report.method == "adasyn"
    assert report.initial_class_counts == (186, 14)
    assert report.final_class_counts == (neg, pos)
    assert report.total_generated == len(out) - len(ds)
    assert report.total_discarded == 0
    # originals keep their tags; everything new is synthetic
    assert report.trajectory == ()
    assert out.provenance[:len(ds)] == ["real"] * len(ds)
    assert set(out.provenance[len(ds):]) == {"synthetic"}


def test_balance_loop_fixed_point():
    ds = blob_dataset(20, 20, seed=3)
    config = small_loop_config(size_multiplier=1.0, min_per_class=10)
    out, report = adasyn_balance_loop(ds, config)
    assert np.array_equal(out.X, ds.X)
    assert np.array_equal(out.y, ds.y)
    assert report.total_generated == 0
    assert report.phases == ()


def test_balance_loop_deterministic():
    ds = blob_dataset(90, 12, seed=4)
    config = small_loop_config(min_per_class=150, seed=77)
    out1, _ = adasyn_balance_loop(ds, config)
    out2, _ = adasyn_balance_loop(ds, config)
    assert np.array_equal(out1.X, out2.X)
    assert np.array_equal(out1.y, out2.y)
    out3, _ = adasyn_balance_loop(ds, small_loop_config(min_per_class=150, seed=78))
    assert not np.array_equal(out1.X, out3.X)


def test_balance_loop_single_class_errors():
    ds = plane_dataset(np.random.default_rng(0).normal(size=(30, 2)), [0] * 30)
    with pytest.raises(AugmentError):
        adasyn_balance_loop(ds, small_loop_config())


# ------------------------------------------------------------- postprocess


def rec(schema, vals):
    return CaseRecord(x=np.array(vals, dtype=np.float64), y=1)


def mixed_schema():
    return FeatureSchema(
        features=(numeric("hours", 1, 41, integer_valued=True),
                  numeric("score", 0.0, 1.0), binary("b")),
        outcome_name="y")


def test_postprocess_clamp_negative_to_zero():
    s = mixed_schema()
    out = postprocess_generated([rec(s, [-2.3, -0.4, 1.0])], "float_clamp_nonneg", s)
    assert out[0].x.tolist() == [0.0, 0.0, 1.0]


def test_postprocess_identity_mode():
    s = mixed_schema()
    records = [rec(s, [-2.3, 0.4, 0.0])]
    out = postprocess_generated(records, "float_allow_negative", s)
    assert out[0].x.tolist() == [-2.3, 0.4, 0.0]


def test_postprocess_round_int_half_away_from_zero():
    s = mixed_schema()
    out = postprocess_generated([rec(s, [2.5, 0.73, 1.0])], "round_int", s)
    assert out[0].x.tolist() == [3.0, 0.73, 1.0]
    out = postprocess_generated([rec(s, [3.5, 0.2, 0.0])], "round_int", s)
    assert out[0].x[0] == 4.0
    # negative integers are clamped before rounding
    out = postprocess_generated([rec(s, [-7.8, 0.2, 0.0])], "round_int", s)
    assert out[0].x[0] == 0.0


def test_postprocess_idempotent():
    s = mixed_schema()
    rng = np.random.default_rng(0)
    records = [rec(s, [rng.normal(5, 10), rng.normal(0, 2), float(rng.integers(0, 2))])
               for _ in range(25)]
    for mode in ("float_allow_negative", "float_clamp_nonneg", "round_int"):
        once = postprocess_generated(records, mode, s)
        twice = postprocess_generated(once, mode, s)
        for a, b in zip(once, twice):
            assert np.array_equal(a.x, b.x)


def test_postprocess_unknown_mode():
    with pytest.raises(AugmentError):
        postprocess_generated([], "zzz", mixed_schema())


# ------------------------------------------------------------- three-phase


def tiny_gan_config(epochs=40):
    return GanConfig(noise_dim=8, generator_layers=(24,), discriminator_layers=(24,),
                     epochs=epochs, learning_rate=1e-3, batch_size=32, seed=0)


def test_three_phase_unrestricted_counts():
    ds = blob_dataset(100, 20, seed=6)
    config = AugmentConfig(method="ctgan", size_multiplier=2.0, min_per_class=10,
                           restriction="none", batch_size_generated=25, seed=1,
                           postprocess="float_clamp_nonneg")
    out, report = gan_three_phase_augment(ds, config, tiny_gan_config())
    neg, pos = out.class_counts()
    assert neg == pos
    assert len(out) >= math.ceil(2.0 * len(ds))
    assert report.total_discarded == 0
    assert report.trajectory == ()
    assert report.initial_silhouette is None
    names = [p.name for p in report.phases]
    assert names == ["phase_i_positive", "phase_ii_negative", "phase_iii_positive"]
    for p in report.phases:
        assert p.accepted + p.discarded == p.generated
    # phase i balances: generated = initial class gap
    assert report.phases[0].generated == 80
    assert set(out.provenance[len(ds):]) == {"synthetic"}


def test_three_phase_restricted_trajectory_replays():
    ds = blob_dataset(60, 12, seed=8, gap=4.0)
    config = AugmentConfig(method="ctgan", size_multiplier=2.0, min_per_class=5,
                           restriction="both", silhouette_min=-0.9,
                           batch_size_generated=20, seed=2,
                           postprocess="float_clamp_nonneg")
    out, report = gan_three_phase_augment(ds, config, tiny_gan_config())
    assert report.initial_silhouette is not None
    assert report.silhouette_min == -0.9
    assert len(report.trajectory) > 0
    decisions = replay_acceptance_decisions(report)
    assert decisions == [t.accepted for t in report.trajectory]
    assert all(decisions)  # permissive threshold: every batch clears it
    neg, pos = out.class_counts()
    assert neg == pos and len(out) >= 2 * len(ds)


def test_three_phase_gate_discards_and_replays_mixed_decisions():
    # overlapping blobs keep the achievable silhouette below the fixed floor,
    # so only the running-reference clause can admit a batch: a well-trained
    # generator produces scores that straddle the ratcheting reference
    ds = blob_dataset(60, 30, seed=9, gap=1.0)
    config = AugmentConfig(method="ctgan", size_multiplier=2.0, min_per_class=5,
                           restriction="both", silhouette_min=0.4,
                           batch_size_generated=10, seed=11,
                           postprocess="float_allow_negative",
                           max_consecutive_discards=60)
    out, report = gan_three_phase_augment(ds, config, tiny_gan_config(epochs=300))
    decisions = [t.accepted for t in report.trajectory]
    assert report.total_discarded > 0 and True in decisions and False in decisions
    assert replay_acceptance_decisions(report) == decisions
    # every accepted batch really joined: accepted counts explain the growth
    assert sum(p.accepted for p in report.phases) == len(out) - len(ds)
    neg, pos = out.class_counts()
    assert neg == pos and len(out) >= 2 * len(ds)


def test_three_phase_starvation_guard():
    ds = blob_dataset(50, 25, seed=10, gap=9.0)
    config = AugmentConfig(method="ctgan", size_multiplier=2.0, min_per_class=5,
                           restriction="both", silhouette_min=0.999,
                           batch_size_generated=10, seed=4,
                           postprocess="float_allow_negative",
                           max_consecutive_discards=3)
    with pytest.raises(AugmentError, match="consecutive"):
        gan_three_phase_augment(ds, config, tiny_gan_config(epochs=2))


def test_three_phase_single_class_errors():
    ds = plane_dataset(np.random.default_rng(0).normal(size=(20, 2)), [1] * 20)
    with pytest.raises(AugmentError):
        gan_three_phase_augment(ds, AugmentConfig(), tiny_gan_config())


# ----------------------------------------------------------------- report


def test_report_json_round_trip(tmp_path):
    report = AugmentReport(
        method="ctgan", restriction="both",
        phases=(PhaseCounts("phase_i_positive", 100, 80, 20),),
        initial_class_counts=(90, 10), final_class_counts=(90, 90),
        initial_silhouette=0.41, silhouette_min=0.3,
        trajectory=(TrajectoryPoint(1, 0.45, True), TrajectoryPoint(2, 0.2, False)))
    back = AugmentReport.from_json_dict(report.to_json_dict())
    assert back == report
    path = tmp_path / "report.json"
    report.save(path)
    assert path.read_text().startswith("{")


def test_phase_counts_validation():
    with pytest.raises(AugmentError):
        PhaseCounts("x", 10, 5, 4)


def test_replay_reference_updates_only_on_accept():
    # start below the fixed threshold so both clauses of the gate are exercised
    scores = [0.15, 0.12, 0.40, 0.35, 0.29]
    want = [True, False, True, True, False]
    report = AugmentReport(
        method="ctgan", restriction="both", phases=(),
        initial_class_counts=(4, 4), final_class_counts=(6, 6),
        initial_silhouette=0.10, silhouette_min=0.30,
        trajectory=tuple(TrajectoryPoint(i + 1, s, a)
                         for i, (s, a) in enumerate(zip(scores, want))))
    assert replay_acceptance_decisions(report) == want


def test_replay_detects_inconsistent_record():
    report = AugmentReport(
        method="ctgan", restriction="both", phases=(),
        initial_class_counts=(4, 4), final_class_counts=(6, 6),
        initial_silhouette=0.10, silhouette_min=0.30,
        trajectory=(TrajectoryPoint(1, 0.05, True),))  # 0.05 beats nothing
    assert replay_acceptance_decisions(report) != [t.accepted for t in report.trajectory]


def test_replay_needs_gating_info():
    report = AugmentReport(method="adasyn", restriction="none", phases=(),
                           initial_class_counts=(1, 1), final_class_counts=(1, 1))
    with pytest.raises(AugmentError):
        replay_acceptance_decisions(report)


def test_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(method="smote")
    with pytest.raises(ValueError):
        AugmentConfig(size_multiplier=0.5)
    with pytest.raises(ValueError):
        AugmentConfig(silhouette_min=1.0)
    with pytest.raises(ValueError):
        AugmentConfig(restriction="positive_only")
    with pytest.raises(ValueError):
        AugmentConfig(postprocess="truncate")
