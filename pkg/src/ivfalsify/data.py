"""Rectangular numeric datasets with CSV import/export."""
from __future__ import annotations

import numpy as np


class DataError(ValueError):
    """Malformed dataset or data file."""


class Dataset:
    """Named numeric columns of equal length, optionally with a cluster column.

    Missing values are rejected at ingestion; columns are read-only views.
    """

    def __init__(self, columns, cluster: str | None = None):
        cols: dict[str, np.ndarray] = {}
        n = None
        for name, values in dict(columns).items():
            if not name or not isinstance(name, str):
                raise DataError(f"invalid column name {name!r}")
            arr = np.array(values, dtype=float)
            if arr.ndim != 1:
                raise DataError(f"column {name!r} is not one-dimensional")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise DataError(
                    f"column {name!r} has {arr.shape[0]} rows, expected {n}"
                )
            if not np.all(np.isfinite(arr)):
                raise DataError(f"column {name!r} contains missing or non-finite values")
            arr.flags.writeable = False
            cols[name] = arr
        if not cols or n == 0:
            raise DataError("dataset must contain at least one column and one row")
        if cluster is not None and cluster not in cols:
            raise DataError(f"cluster column {cluster!r} not present")
        self._cols = cols
        self._n = n
        self.cluster = cluster

    @property
    def n(self) -> int:
        return self._n

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._cols)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._cols[name]
        except KeyError:
            raise DataError(f"unknown column {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._cols

    def subset(self, names) -> "Dataset":
        names = list(names)
        cluster = self.cluster if self.cluster in names else None
        return Dataset({n: self[n] for n in names}, cluster=cluster)

    def with_columns(self, extra) -> "Dataset":
        merged = dict(self._cols)
        for name, values in dict(extra).items():
            if name in merged:
                raise DataError(f"column {name!r} already present")
            merged[name] = values
        return Dataset(merged, cluster=self.cluster)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(self.names) + "\n")
            mat = [self._cols[n] for n in self.names]
            for i in range(self._n):
                fh.write(",".join(repr(float(col[i])) for col in mat) + "\n")

    @classmethod
    def from_csv(cls, path, cluster: str | None = None) -> "Dataset":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if not header:
                raise DataError(f"{path}: empty file")
            names = header.split(",")
            cols: list[list[float]] = [[] for _ in names]
            for lineno, line in enumerate(fh, start=2):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != len(names):
                    raise DataError(f"{path}:{lineno}: expected {len(names)} fields, got {len(parts)}")
                for j, p in enumerate(parts):
                    if p == "":
                        raise DataError(f"{path}:{lineno}: missing value in column {names[j]!r}")
                    try:
                        cols[j].append(float(p))
                    except ValueError:
                        raise DataError(f"{path}:{lineno}: non-numeric value {p!r}") from None
        return cls({name: col for name, col in zip(names, cols)}, cluster=cluster)
