"""Schema encoding/decoding and the dataset container."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabrisk.schema import (
    CaseRecord,
    Dataset,
    FeatureSchema,
    SchemaError,
    binary,
    categorical,
    numeric,
)


def tiny_schema():
    return FeatureSchema(
        features=(
            numeric("age", 10, 50, integer_valued=True),
            binary("flag"),
            categorical("color", ("red", "green", "blue")),
            numeric("ratio", 0.0, 1.0),
        ),
        outcome_name="label",
    )


def test_encoded_width_counts_one_hot_blocks():
    s = tiny_schema()
    assert s.n_features == 4
    assert s.d == 1 + 1 + 3 + 1
    assert s.slot_range("color") == (2, 5)
    assert s.slot_names()[2:5] == ["color=red", "color=green", "color=blue"]


def test_encode_decode_round_trip():
    s = tiny_schema()
    row = {"age": 30, "flag": 1, "color": "green", "ratio": 0.25}
    vec = s.encode_row(row)
    assert vec.tolist() == [30.0, 1.0, 0.0, 1.0, 0.0, 0.25]
    assert s.decode_vector(vec) == row


def test_encode_rejects_unknown_level_and_missing_feature():
    s = tiny_schema()
    with pytest.raises(SchemaError):
        s.encode_row({"age": 30, "flag": 1, "color": "purple", "ratio": 0.2})
    with pytest.raises(SchemaError):
        s.encode_row({"age": 30, "flag": 1, "ratio": 0.2})
    with pytest.raises(SchemaError):
        s.encode_row({"age": 30, "flag": 3, "color": "red", "ratio": 0.2})


def test_decode_snaps_categorical_argmax():
    s = tiny_schema()
    vec = np.array([20.0, 0.0, 0.2, 0.7, 0.1, 0.5])
    assert s.decode_vector(vec)["color"] == "green"


def test_schema_validation_errors():
    with pytest.raises(SchemaError):
        categorical("c", ("only",))  # needs at least 2 levels
    with pytest.raises(SchemaError):
        numeric("n", 5, 5)  # empty range
    with pytest.raises(SchemaError):
        FeatureSchema(features=(binary("a"), binary("a")), outcome_name="y")


def test_schema_json_round_trip(tmp_path):
    s = tiny_schema()
    path = tmp_path / "schema.json"
    s.save(path)
    back = FeatureSchema.load(path)
    assert back == s
    assert back.slot_names() == s.slot_names()


def test_masks_and_blocks():
    s = tiny_schema()
    assert s.numeric_slots().tolist() == [True, False, False, False, False, True]
    assert s.binary_slots().tolist() == [False, True, False, False, False, False]
    assert s.integer_slots().tolist() == [True, False, False, False, False, False]
    assert s.categorical_blocks() == [(2, 5)]


def test_dataset_from_rows_and_counts():
    s = tiny_schema()
    ds = Dataset.from_rows(s, [
        {"age": 20, "flag": 0, "color": "red", "ratio": 0.1},
        {"age": 40, "flag": 1, "color": "blue", "ratio": 0.9},
        {"age": 30, "flag": 0, "color": "green", "ratio": 0.5},
    ], labels=[0, 1, 1])
    assert len(ds) == 3
    assert ds.class_counts() == (1, 2)
    assert ds.provenance == ["real", "real", "real"]
    rec = ds.record(1)
    assert rec.y == 1 and s.decode_vector(rec.x)["color"] == "blue"


def test_dataset_from_encoded_records():
    s = tiny_schema()
    row = {"age": 25, "flag": 1, "color": "red", "ratio": 0.7}
    ds = Dataset.from_records(s, [CaseRecord(x=s.encode_row(row), y=0)])
    assert len(ds) == 1 and ds.y.tolist() == [0]
    with pytest.raises(SchemaError):
        CaseRecord(x=s.encode_row(row), y=2)


def test_dataset_rejects_broken_one_hot():
    s = tiny_schema()
    X = np.array([[20.0, 0.0, 1.0, 1.0, 0.0, 0.5]])  # two hot slots
    with pytest.raises(SchemaError):
        Dataset(schema=s, X=X, y=np.array([0]))


def test_dataset_subset_and_append():
    s = tiny_schema()
    rows = [{"age": 20 + i, "flag": i % 2, "color": "red", "ratio": 0.1 * i}
            for i in range(6)]
    ds = Dataset.from_rows(s, rows, labels=[i % 2 for i in range(6)])
    sub = ds.subset([0, 2, 4])
    assert len(sub) == 3 and sub.class_counts() == (3, 0)
    grown = ds.with_records_added(
        [CaseRecord(x=s.encode_row({"age": 33, "flag": 1, "color": "blue", "ratio": 0.4}),
                    y=1)],
        provenance="synthetic")
    assert len(grown) == 7
    assert grown.provenance[-1] == "synthetic"
    assert len(ds) == 6  # original untouched


def test_vector_set_fingerprints_detect_overlap():
    s = tiny_schema()
    rows = [
        {"age": 21, "flag": 0, "color": "red", "ratio": 0.3},
        {"age": 22, "flag": 1, "color": "green", "ratio": 0.6},
    ]
    ds = Dataset.from_rows(s, rows, labels=[0, 1])
    other = Dataset.from_rows(s, rows[:1], labels=[0])
    assert ds.vector_set() & other.vector_set()
    disjoint = Dataset.from_rows(
        s, [{"age": 45, "flag": 0, "color": "blue", "ratio": 0.0}], labels=[0])
    assert not (disjoint.vector_set() & other.vector_set())


@given(st.integers(10, 50), st.integers(0, 1),
       st.sampled_from(["red", "green", "blue"]),
       st.floats(0.0, 1.0, allow_nan=False))
@settings(max_examples=60, deadline=None)
def test_encode_decode_round_trip_property(age, flag, color, ratio):
    s = tiny_schema()
    row = {"age": age, "flag": flag, "color": color, "ratio": ratio}
    assert s.decode_vector(s.encode_row(row)) == row
