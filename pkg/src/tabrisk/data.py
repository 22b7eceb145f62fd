"""CSV ingestion, min-max scaling, balanced splitting and the synthetic benchmark.

The benchmark generator stands in for a private clinical dataset: 34 risk
factors in four groups (maternal, obstetrical, fetal, delivery) with a noisy
linear-threshold labeler over six declared features, so explanation tests
have a known ground truth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .schema import (
    Dataset,
    FeatureSchema,
    PROVENANCE_REAL,
    SchemaError,
    binary,
    categorical,
    numeric,
)


class DataError(ValueError):
    """CSV or split-level failures, always carrying row/column context."""


# ---------------------------------------------------------------------------
# min-max scaling


@dataclass(frozen=True)
class ScalerParams:
    """Observed per-slot minima and maxima on the fitted dataset."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if (self.maxs < self.mins).any():
            raise DataError("scaler max < min")

    @property
    def width(self) -> int:
        return self.mins.shape[0]

    def to_json_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ScalerParams":
        return cls(mins=np.asarray(doc["mins"], dtype=np.float64),
                   maxs=np.asarray(doc["maxs"], dtype=np.float64))


def fit_minmax(dataset: Dataset) -> ScalerParams:
    if len(dataset) == 0:
        raise DataError("cannot fit scaler on an empty dataset")
    return ScalerParams(mins=dataset.X.min(axis=0), maxs=dataset.X.max(axis=0))


def transform_minmax(scaler: ScalerParams, x: np.ndarray) -> np.ndarray:
    """Map each slot to (v - min) / (max - min).

    Constant slots map to 0.  Out-of-range inputs are deliberately not
    clipped: generated data may carry values outside the fitted range.
    Accepts a vector or a (n, d) matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != scaler.width:
        raise DataError(f"vector width {x.shape[-1]} != scaler width {scaler.width}")
    span = scaler.maxs - scaler.mins
    out = np.zeros_like(x)
    nz = span > 0
    out[..., nz] = (x[..., nz] - scaler.mins[nz]) / span[nz]
    return out


def inverse_minmax(scaler: ScalerParams, s: np.ndarray) -> np.ndarray:
    """Inverse of transform_minmax; constant slots return their fitted value."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] != scaler.width:
        raise DataError(f"vector width {s.shape[-1]} != scaler width {scaler.width}")
    return s * (scaler.maxs - scaler.mins) + scaler.mins


# ---------------------------------------------------------------------------
# CSV load / save

PROVENANCE_COLUMN = "provenance"


def load_dataset(path, schema: FeatureSchema) -> Dataset:
    """Read a CSV against a schema. Row order is preserved.

    The header must contain every schema feature name; the outcome column
    and a provenance column are optional.  Errors name the offending row
    (1-based, excluding the header) and column.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        expected = [f.name for f in schema.features]
        missing = [name for name in expected if name not in header]
        if missing:
            raise DataError(f"{path}: header missing feature columns {missing}")
        has_outcome = schema.outcome_name in header
        has_provenance = PROVENANCE_COLUMN in header
        col_of = {name: header.index(name) for name in header}

        rows_x, rows_y, prov = [], [], []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(f"row {rownum}: expected {len(header)} cells, got {len(row)}")
            values = {}
            for f in schema.features:
                cell = row[col_of[f.name]]
                if f.kind == "categorical":
                    if cell not in f.levels:
                        raise DataError(
                            f"row {rownum}, column {f.name!r}: {cell!r} is not one of {list(f.levels)}")
                    values[f.name] = cell
                else:
                    try:
                        values[f.name] = float(cell)
                    except ValueError:
                        raise DataError(
                            f"row {rownum}, column {f.name!r}: cannot parse {cell!r} as a number") from None
            if has_outcome:
                cell = row[col_of[schema.outcome_name]]
                if cell not in ("0", "1"):
                    raise DataError(
                        f"row {rownum}, column {schema.outcome_name!r}: outcome must be 0 or 1, got {cell!r}")
                rows_y.append(int(cell))
            else:
                rows_y.append(-1)
            prov.append(row[col_of[PROVENANCE_COLUMN]] if has_provenance else PROVENANCE_REAL)
            try:
                rows_x.append(schema.encode_row(values))
            except SchemaError as exc:
                raise DataError(f"row {rownum}: {exc}") from None

    X = np.array(rows_x, dtype=np.float64).reshape(len(rows_x), schema.d)
    return Dataset(schema=schema, X=X, y=np.array(rows_y, dtype=np.int64), provenance=prov)


def _format_cell(spec, value: float) -> str:
    if spec.kind == "binary" or (spec.kind == "numeric" and spec.integer_valued
                                 and float(value).is_integer()):
        return str(int(value))
    return repr(float(value))


def save_dataset(dataset: Dataset, path, include_provenance: bool = False) -> None:
    """Write the canonical CSV form: header, one row per record, raw units."""
    schema = dataset.schema
    header = [f.name for f in schema.features]
    labeled = (dataset.y >= 0).any()
    if labeled:
        header.append(schema.outcome_name)
    if include_provenance:
        header.append(PROVENANCE_COLUMN)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(dataset)):
            decoded = schema.decode_vector(dataset.X[i])
            row = []
            for f in schema.features:
                v = decoded[f.name]
                row.append(v if f.kind == "categorical" else _format_cell(f, v))
            if labeled:
                row.append(str(int(dataset.y[i])))
            if include_provenance:
                row.append(dataset.provenance[i])
            writer.writerow(row)


# ---------------------------------------------------------------------------
# balanced test split


def split_balanced_test(dataset: Dataset, n_per_class: int, seed: int) -> tuple[Dataset, Dataset]:
    """Sample ``n_per_class`` records per class (without replacement) as the
    test set; the remainder becomes the training set."""
    neg_idx = np.flatnonzero(dataset.y == 0)
    pos_idx = np.flatnonzero(dataset.y == 1)
    if len(pos_idx) < n_per_class or len(neg_idx) < n_per_class:
        raise DataError(
            f"need {n_per_class} records per class, have {len(neg_idx)} negative / {len(pos_idx)} positive")
    rng = np.random.default_rng(seed)
    test_idx = np.concatenate([
        rng.choice(neg_idx, size=n_per_class, replace=False),
        rng.choice(pos_idx, size=n_per_class, replace=False),
    ])
    test_mask = np.zeros(len(dataset), dtype=bool)
    test_mask[test_idx] = True
    return dataset.subset(np.flatnonzero(~test_mask)), dataset.subset(np.sort(test_idx))


# ---------------------------------------------------------------------------
# benchmark generator


def default_benchmark_schema() -> FeatureSchema:
    """34 risk factors in four groups; numeric ranges follow the published
    dataset summary (age 15-47, gestation 27-42 wk, labor 1-41 h, weight
    950-4905 g)."""
    maternal = [
        numeric("maternal_age", 15, 47, integer_valued=True),
        binary("diabetes"),
        binary("chronic_hypertension"),
        binary("obesity"),
        binary("smoking"),
        binary("preexisting_cardiac_disease"),
        binary("anemia"),
    ]
    obstetrical = [
        numeric("parity", 0, 8, integer_valued=True),
        numeric("gestational_age_weeks", 27, 42, integer_valued=True),
        binary("preeclampsia"),
        binary("gestational_diabetes"),
        binary("placenta_previa"),
        binary("placental_abruption"),
        binary("oligohydramnios"),
        binary("chorioamnionitis"),
        binary("premature_rupture_of_membranes"),
    ]
    fetal = [
        numeric("fetal_weight_grams", 950, 4905, integer_valued=True),
        categorical("fetal_presentation", ("cephalic", "breech", "transverse")),
        binary("growth_restriction"),
        binary("abnormal_baseline_fhr"),
        binary("absent_fhr_accelerations"),
        binary("abnormal_decelerations"),
        binary("abnormal_fhr_variability"),
        binary("abnormal_fhr_pattern"),
        binary("meconium_stained_fluid"),
    ]
    delivery = [
        numeric("labor_duration_hours", 1, 41, integer_valued=True),
        binary("induced_labor"),
        binary("oxytocin_augmentation"),
        binary("epidural_analgesia"),
        binary("cesarean_section"),
        binary("instrumental_delivery"),
        binary("excessive_uterine_activity"),
        binary("cord_prolapse"),
        binary("shoulder_dystocia"),
    ]
    return FeatureSchema(features=tuple(maternal + obstetrical + fetal + delivery),
                         outcome_name="abnormal_outcome")


# Weights of the labeling rule, applied to range-scaled feature values.
# These six features carry the signal; everything else is distractor noise.
DEFAULT_LABEL_WEIGHTS: dict[str, float] = {
    "abnormal_fhr_pattern": 2.2,
    "abnormal_decelerations": 1.6,
    "abnormal_fhr_variability": 1.3,
    "absent_fhr_accelerations": 1.1,
    "excessive_uterine_activity": 0.8,
    "fetal_weight_grams": -1.0,
}

# Bernoulli rates for binary features (signal features kept uncommon so the
# positive class is a rare-combination class, like the clinical original).
_BINARY_RATES: dict[str, float] = {
    "diabetes": 0.08, "chronic_hypertension": 0.07, "obesity": 0.22,
    "smoking": 0.12, "preexisting_cardiac_disease": 0.03, "anemia": 0.15,
    "preeclampsia": 0.06, "gestational_diabetes": 0.09, "placenta_previa": 0.02,
    "placental_abruption": 0.02, "oligohydramnios": 0.05, "chorioamnionitis": 0.03,
    "premature_rupture_of_membranes": 0.10, "growth_restriction": 0.06,
    "abnormal_baseline_fhr": 0.12, "absent_fhr_accelerations": 0.18,
    "abnormal_decelerations": 0.16, "abnormal_fhr_variability": 0.14,
    "abnormal_fhr_pattern": 0.15, "meconium_stained_fluid": 0.12,
    "induced_labor": 0.25, "oxytocin_augmentation": 0.30, "epidural_analgesia": 0.55,
    "cesarean_section": 0.28, "instrumental_delivery": 0.08,
    "excessive_uterine_activity": 0.10, "cord_prolapse": 0.01, "shoulder_dystocia": 0.02,
}

_CATEGORICAL_RATES: dict[str, tuple[float, ...]] = {
    "fetal_presentation": (0.93, 0.05, 0.02),
}


@dataclass(frozen=True)
class LabelRule:
    """Noisy linear threshold: score = sum(w_f * scaled(x_f)) + noise."""

    weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LABEL_WEIGHTS))
    noise_level: float = 0.55


@dataclass(frozen=True)
class BenchmarkConfig:
    n_total: int = 1457
    n_positive: int = 112
    seed: int = 0
    label_rule: LabelRule = field(default_factory=LabelRule)

    def __post_init__(self):
        if not 0 < self.n_positive < self.n_total:
            raise DataError("need 0 < n_positive < n_total")


def _schema_scaled(schema: FeatureSchema, name: str, values: np.ndarray) -> np.ndarray:
    spec = schema.feature(name)
    if spec.kind == "numeric":
        return (values - spec.min_value) / (spec.max_value - spec.min_value)
    return values


def benchmark_label_scores(schema: FeatureSchema, X: np.ndarray, rule: LabelRule) -> np.ndarray:
    """Deterministic part of the labeling score for encoded rows."""
    scores = np.zeros(X.shape[0])
    for name, w in rule.weights.items():
        lo, hi = schema.slot_range(name)
        if hi - lo != 1:
            raise DataError(f"label rule feature {name!r} must be single-slot")
        scores += w * _schema_scaled(schema, name, X[:, lo])
    return scores


def generate_benchmark_dataset(config: BenchmarkConfig,
                               schema: FeatureSchema | None = None) -> Dataset:
    """Draw ``n_total`` records within schema ranges and label exactly
    ``n_positive`` of them 1 by the noisy score's top quantile."""
    schema = schema or default_benchmark_schema()
    rng = np.random.default_rng(config.seed)
    n = config.n_total
    X = np.zeros((n, schema.d))
    for f in schema.features:
        lo, hi = schema.slot_range(f.name)
        if f.kind == "binary":
            X[:, lo] = (rng.random(n) < _BINARY_RATES.get(f.name, 0.1)).astype(float)
        elif f.kind == "numeric":
            center = 0.5 * (f.min_value + f.max_value)
            spread = (f.max_value - f.min_value) / 4.5
            vals = rng.normal(center, spread, size=n)
            vals = np.clip(vals, f.min_value, f.max_value)
            if f.integer_valued:
                vals = np.rint(vals)
            X[:, lo] = vals
        else:
            probs = _CATEGORICAL_RATES.get(f.name, tuple(1 / f.width for _ in range(f.width)))
            draws = rng.choice(f.width, size=n, p=probs)
            X[np.arange(n), lo + draws] = 1.0

    scores = benchmark_label_scores(schema, X, config.label_rule)
    scores = scores + config.label_rule.noise_level * rng.standard_normal(n)
    # top-n_positive scores become the positive class; argsort is stable so
    # ties resolve by row order, keeping the draw deterministic
    order = np.argsort(-scores, kind="stable")
    y = np.zeros(n, dtype=np.int64)
    y[order[:config.n_positive]] = 1
    return Dataset(schema=schema, X=X, y=y, provenance=[PROVENANCE_REAL] * n)
