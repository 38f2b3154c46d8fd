"""Tabular datasets: input truth values in [0, 1] plus one target column."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .logic import write_table_csv


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    inputs: np.ndarray  # rows x m
    targets: np.ndarray  # rows
    column_names: tuple[str, ...]

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1)
        self.column_names = tuple(self.column_names)
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DatasetError(
                f"{self.inputs.shape[0]} input rows but {self.targets.shape[0]} targets"
            )
        if self.inputs.shape[1] != len(self.column_names):
            raise DatasetError(
                f"{self.inputs.shape[1]} input columns but {len(self.column_names)} names"
            )
        for arr in (self.inputs, self.targets):
            if arr.size and (np.nanmin(arr) < 0 or np.nanmax(arr) > 1 or np.isnan(arr).any()):
                raise DatasetError("truth values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]

    def check_consistent(self) -> None:
        """Raise if two identical input rows carry different targets."""
        seen: dict[bytes, float] = {}
        for x, y in zip(self.inputs, self.targets):
            key = x.tobytes()
            if seen.setdefault(key, y) != y:
                raise DatasetError(f"conflicting targets for input row {x.tolist()}")

    def to_csv(self, path) -> None:
        write_table_csv(path, self.column_names, self.inputs, self.targets)


def read_dataset_csv(path, target: str = "target") -> Dataset:
    """Read a numeric CSV whose header names the inputs and a ``target`` column."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if target not in header:
        raise DatasetError(f"{path}: no {target!r} column in header")
    t = header.index(target)
    names = [h for i, h in enumerate(header) if i != t]
    try:
        values = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise DatasetError(f"{path}: non-numeric value ({exc})") from exc
    if values.ndim != 2 or values.shape[1] != len(header):
        raise DatasetError(f"{path}: ragged rows")
    inputs = np.delete(values, t, axis=1)
    return Dataset(inputs, values[:, t], names)


def dataset_from_columns(columns: Sequence[str], inputs, targets) -> Dataset:
    return Dataset(np.asarray(inputs, dtype=float), np.asarray(targets, dtype=float), columns)
