"""Feature schema, record encoding and the core dataset container.

Records are stored in *encoded* form: one slot per binary or numeric
feature, one slot per level of a categorical feature (one-hot).  Encoded
values stay in raw units; min-max scaling is applied separately where a
normalized space is needed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PROVENANCE_REAL = "real"
PROVENANCE_SYNTHETIC = "synthetic"


class SchemaError(ValueError):
    """Raised for malformed feature specs or schema violations."""


@dataclass(frozen=True)
class FeatureSpec:
    """One declared feature: binary, categorical(levels) or numeric(range)."""

    name: str
    kind: str  # "binary" | "categorical" | "numeric"
    levels: tuple[str, ...] = ()
    min_value: float = 0.0
    max_value: float = 1.0
    integer_valued: bool = False

    def __post_init__(self):
        if not self.name:
            raise SchemaError("feature name must be non-empty")
        if self.kind not in ("binary", "categorical", "numeric"):
            raise SchemaError(f"unknown feature kind {self.kind!r} for {self.name!r}")
        if self.kind == "categorical" and len(self.levels) < 2:
            raise SchemaError(f"categorical feature {self.name!r} needs >= 2 levels")
        if self.kind == "numeric" and not self.min_value < self.max_value:
            raise SchemaError(f"numeric feature {self.name!r} requires min < max")

    @property
    def width(self) -> int:
        return len(self.levels) if self.kind == "categorical" else 1


def binary(name: str) -> FeatureSpec:
    return FeatureSpec(name=name, kind="binary")


def numeric(name: str, min_value: float, max_value: float, integer_valued: bool = False) -> FeatureSpec:
    return FeatureSpec(name=name, kind="numeric", min_value=min_value,
                       max_value=max_value, integer_valued=integer_valued)


def categorical(name: str, levels: Sequence[str]) -> FeatureSpec:
    return FeatureSpec(name=name, kind="categorical", levels=tuple(levels))


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature list plus the outcome column name.

    ``d`` is the encoded width: binary and numeric features occupy one
    slot each, categoricals one slot per level in declared order.
    """

    features: tuple[FeatureSpec, ...]
    outcome_name: str = "outcome"

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names in schema")
        if self.outcome_name in names:
            raise SchemaError("outcome name collides with a feature name")

    @property
    def d(self) -> int:
        return sum(f.width for f in self.features)

    @property
    def n_features(self) -> int:
        return len(self.features)

    def feature(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def slot_range(self, name: str) -> tuple[int, int]:
        """Half-open [start, stop) slot range of a feature in the encoded vector."""
        start = 0
        for f in self.features:
            if f.name == name:
                return start, start + f.width
            start += f.width
        raise KeyError(name)

    def slot_names(self) -> list[str]:
        names = []
        for f in self.features:
            if f.kind == "categorical":
                names.extend(f"{f.name}={lv}" for lv in f.levels)
            else:
                names.append(f.name)
        return names

    def numeric_slots(self) -> np.ndarray:
        """Boolean mask over encoded slots: True where the slot is a numeric feature."""
        mask = np.zeros(self.d, dtype=bool)
        for f in self.features:
            if f.kind == "numeric":
                lo, hi = self.slot_range(f.name)
                mask[lo:hi] = True
        return mask

    def integer_slots(self) -> np.ndarray:
        mask = np.zeros(self.d, dtype=bool)
        for f in self.features:
            if f.kind == "numeric" and f.integer_valued:
                lo, hi = self.slot_range(f.name)
                mask[lo:hi] = True
        return mask

    def binary_slots(self) -> np.ndarray:
        mask = np.zeros(self.d, dtype=bool)
        for f in self.features:
            if f.kind == "binary":
                lo, hi = self.slot_range(f.name)
                mask[lo:hi] = True
        return mask

    def categorical_blocks(self) -> list[tuple[int, int]]:
        return [self.slot_range(f.name) for f in self.features if f.kind == "categorical"]

    def encode_row(self, values: dict) -> np.ndarray:
        """Encode a name -> raw value mapping into a length-d vector."""
        x = np.zeros(self.d, dtype=np.float64)
        pos = 0
        for f in self.features:
            if f.name not in values:
                raise SchemaError(f"missing value for feature {f.name!r}")
            v = values[f.name]
            if f.kind == "categorical":
                if v not in f.levels:
                    raise SchemaError(
                        f"value {v!r} not in levels of categorical feature {f.name!r}")
                x[pos + f.levels.index(v)] = 1.0
            else:
                try:
                    fv = float(v)
                except (TypeError, ValueError):
                    raise SchemaError(
                        f"value {v!r} for feature {f.name!r} is not a number") from None
                if not np.isfinite(fv):
                    raise SchemaError(f"non-finite value for feature {f.name!r}")
                if f.kind == "binary" and fv not in (0.0, 1.0):
                    raise SchemaError(
                        f"binary feature {f.name!r} must be 0 or 1, got {v!r}")
                x[pos] = fv
            pos += f.width
        return x

    def decode_vector(self, x: np.ndarray) -> dict:
        """Inverse of encode_row; categorical blocks decode by argmax."""
        values: dict = {}
        pos = 0
        for f in self.features:
            if f.kind == "categorical":
                block = x[pos:pos + f.width]
                values[f.name] = f.levels[int(np.argmax(block))]
            else:
                v = float(x[pos])
                values[f.name] = int(v) if f.kind == "binary" or (
                    f.kind == "numeric" and f.integer_valued and float(v).is_integer()) else v
            pos += f.width
        return values

    def to_json_dict(self) -> dict:
        feats = []
        for f in self.features:
            entry: dict = {"name": f.name, "kind": f.kind}
            if f.kind == "categorical":
                entry["levels"] = list(f.levels)
            elif f.kind == "numeric":
                entry.update(min=f.min_value, max=f.max_value,
                             integer_valued=f.integer_valued)
            feats.append(entry)
        return {"features": feats, "outcome_name": self.outcome_name}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FeatureSchema":
        feats = []
        for entry in doc["features"]:
            kind = entry["kind"]
            if kind == "categorical":
                feats.append(categorical(entry["name"], entry["levels"]))
            elif kind == "numeric":
                feats.append(numeric(entry["name"], entry["min"], entry["max"],
                                     entry.get("integer_valued", False)))
            else:
                feats.append(binary(entry["name"]))
        return cls(features=tuple(feats), outcome_name=doc.get("outcome_name", "outcome"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class CaseRecord:
    """One case: encoded vector ``x`` and optional binary outcome ``y``."""

    x: np.ndarray
    y: int | None = None

    def __post_init__(self):
        if self.y is not None and self.y not in (0, 1):
            raise SchemaError(f"outcome must be 0 or 1, got {self.y}")


@dataclass
class Dataset:
    """Schema-conformant records held as arrays for vectorized work.

    ``y`` uses -1 for records without an outcome.  Provenance tags each
    record as real or synthetic.
    """

    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[1] != self.schema.d:
            raise SchemaError(
                f"X must be (n, {self.schema.d}), got {self.X.shape}")
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.y.shape != (self.X.shape[0],):
            raise SchemaError("y length must match number of records")
        if not self.provenance:
            self.provenance = [PROVENANCE_REAL] * len(self)
        if len(self.provenance) != len(self):
            raise SchemaError("provenance length must match number of records")
        self._check_onehot()

    def _check_onehot(self):
        for lo, hi in self.schema.categorical_blocks():
            block = self.X[:, lo:hi]
            if len(block) and not (np.isclose(block.sum(axis=1), 1.0).all()
                                   and ((block == 0) | (block == 1)).all()):
                raise SchemaError("categorical one-hot blocks must have exactly one hot slot")

    def __len__(self) -> int:
        return self.X.shape[0]

    @classmethod
    def from_records(cls, schema: FeatureSchema, records: Iterable[CaseRecord],
                     provenance: list[str] | None = None) -> "Dataset":
        records = list(records)
        X = np.array([r.x for r in records], dtype=np.float64).reshape(len(records), schema.d)
        y = np.array([-1 if r.y is None else r.y for r in records], dtype=np.int64)
        return cls(schema=schema, X=X, y=y, provenance=provenance or [])

    @classmethod
    def from_rows(cls, schema: FeatureSchema, rows: Sequence[dict],
                  labels: Sequence[int] | None = None,
                  provenance: list[str] | None = None) -> "Dataset":
        """Encode name->value dict rows; ``labels`` may be None for unlabeled."""
        rows = list(rows)
        X = np.array([schema.encode_row(r) for r in rows],
                     dtype=np.float64).reshape(len(rows), schema.d)
        if labels is None:
            y = np.full(len(rows), -1, dtype=np.int64)
        else:
            y = np.asarray(list(labels), dtype=np.int64)
        return cls(schema=schema, X=X, y=y, provenance=provenance or [])

    @classmethod
    def empty(cls, schema: FeatureSchema) -> "Dataset":
        return cls(schema=schema, X=np.empty((0, schema.d)), y=np.empty((0,), dtype=np.int64))

    def record(self, i: int) -> CaseRecord:
        yi = int(self.y[i])
        return CaseRecord(x=self.X[i].copy(), y=None if yi < 0 else yi)

    def records(self) -> list[CaseRecord]:
        return [self.record(i) for i in range(len(self))]

    def class_counts(self) -> tuple[int, int]:
        """(negatives, positives) among labeled records."""
        return int((self.y == 0).sum()), int((self.y == 1).sum())

    def subset(self, indices: np.ndarray) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(schema=self.schema, X=self.X[indices].copy(), y=self.y[indices].copy(),
                       provenance=[self.provenance[i] for i in indices])

    def with_records_added(self, records: Sequence[CaseRecord],
                           provenance: str = PROVENANCE_SYNTHETIC) -> "Dataset":
        if not records:
            return Dataset(schema=self.schema, X=self.X.copy(), y=self.y.copy(),
                           provenance=list(self.provenance))
        extra = Dataset.from_records(self.schema, records,
                                     provenance=[provenance] * len(records))
        return Dataset(schema=self.schema,
                       X=np.vstack([self.X, extra.X]),
                       y=np.concatenate([self.y, extra.y]),
                       provenance=list(self.provenance) + list(extra.provenance))

    def vector_set(self) -> set[bytes]:
        """Exact-equality fingerprints of encoded vectors, for disjointness audits."""
        return {row.tobytes() for row in np.ascontiguousarray(self.X)}
