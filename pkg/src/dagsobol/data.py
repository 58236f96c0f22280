"""Datasets: named numeric columns of equal length, with CSV round-tripping."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, MissingColumn


@dataclass
class Dataset:
    columns: dict[str, np.ndarray]
    provenance: str = ""
    names: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        cols = {str(k): np.asarray(v, dtype=float).reshape(-1) for k, v in self.columns.items()}
        if not cols:
            raise DataError("dataset has no columns")
        lengths = {len(v) for v in cols.values()}
        if len(lengths) != 1:
            raise DataError(f"columns have different lengths: {sorted(lengths)}")
        if lengths.pop() == 0:
            raise DataError("dataset has no rows")
        for k, v in cols.items():
            if not np.all(np.isfinite(v)):
                row = int(np.nonzero(~np.isfinite(v))[0][0])
                raise DataError(f"non-finite value in column {k!r} at row {row}")
        self.columns = cols
        self.names = tuple(cols)

    @property
    def m(self) -> int:
        return len(next(iter(self.columns.values())))

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise MissingColumn(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def require(self, names: Sequence[str], context: str = "") -> None:
        for v in names:
            if v not in self.columns:
                raise MissingColumn(v, context)

    def subset(self, names: Sequence[str]) -> dict[str, np.ndarray]:
        self.require(names)
        return {v: self.columns[v] for v in names}

    def take(self, rows: np.ndarray) -> "Dataset":
        return Dataset({k: v[rows] for k, v in self.columns.items()}, self.provenance)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            cols = [self.columns[n] for n in self.names]
            for i in range(self.m):
                # repr of a Python float round-trips exactly
                w.writerow([repr(float(c[i])) for c in cols])


def read_csv(path: str | Path) -> Dataset:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header) or any(not h for h in header):
            raise DataError(f"{path}: header has empty or duplicate names")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise DataError(f"{path} has no data rows")
    arr = np.array(rows, dtype=float)
    return Dataset({h: arr[:, j] for j, h in enumerate(header)}, provenance=f"loaded({path})")


def from_mapping(cols: Mapping[str, np.ndarray], provenance: str = "") -> Dataset:
    return Dataset(dict(cols), provenance)
