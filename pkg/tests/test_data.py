"""Dataset container and CSV round-tripping."""

import numpy as np
import pytest

from ivfalsify import DataError, Dataset


def small():
    return Dataset({"a": [1.0, 2.0, 3.0], "b": [0.5, -1.5, 2.25]})


def test_columns_keep_order_and_length():
    ds = small()
    assert ds.names == ("a", "b")
    assert ds.n == 3
    assert np.array_equal(ds["a"], [1.0, 2.0, 3.0])
    assert "a" in ds and "z" not in ds


def test_columns_are_read_only():
    ds = small()
    with pytest.raises(ValueError):
        ds["a"][0] = 99.0


@pytest.mark.parametrize(
    "columns",
    [
        {},
        {"a": []},
        {"a": [1.0], "b": [1.0, 2.0]},
        {"a": [1.0, float("nan")]},
        {"a": [1.0, float("inf")]},
        {"a": [[1.0, 2.0]]},
        {"": [1.0]},
    ],
)
def test_bad_inputs_rejected(columns):
    with pytest.raises(DataError):
        Dataset(columns)


def test_unknown_column_lookup_is_an_error():
    with pytest.raises(DataError, match="unknown column"):
        small()["zzz"]


def test_cluster_column_must_exist():
    Dataset({"a": [1.0, 2.0], "g": [0.0, 1.0]}, cluster="g")
    with pytest.raises(DataError):
        Dataset({"a": [1.0, 2.0]}, cluster="g")


def test_subset_and_with_columns():
    ds = Dataset({"a": [1.0, 2.0], "g": [0.0, 1.0]}, cluster="g")
    sub = ds.subset(["a"])
    assert sub.names == ("a",) and sub.cluster is None
    keep = ds.subset(["a", "g"])
    assert keep.cluster == "g"
    grown = ds.with_columns({"c": [5.0, 6.0]})
    assert grown.names == ("a", "g", "c")
    assert grown.cluster == "g"
    with pytest.raises(DataError, match="already present"):
        ds.with_columns({"a": [0.0, 0.0]})


def test_csv_round_trip_is_exact(tmp_path):
    ds = Dataset({"x": [0.1, 2.0, -3.5e-8], "y": [1.0, 2.0, 3.0]})
    path = tmp_path / "d.csv"
    ds.to_csv(path)
    back = Dataset.from_csv(path)
    assert back.names == ds.names
    for name in ds.names:
        assert np.array_equal(back[name], ds[name])


def test_csv_header_and_newlines(tmp_path):
    path = tmp_path / "d.csv"
    Dataset({"x": [1.0], "y": [2.0]}).to_csv(path)
    raw = path.read_bytes()
    assert raw.startswith(b"x,y\n")
    assert b"\r" not in raw


@pytest.mark.parametrize(
    "body,message",
    [
        ("", "empty"),
        ("a,b\n1.0\n", "expected 2 fields"),
        ("a,b\n1.0,\n", "missing value"),
        ("a,b\n1.0,spam\n", "non-numeric"),
    ],
)
def test_csv_ingestion_failures(tmp_path, body, message):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataError, match=message):
        Dataset.from_csv(path)
