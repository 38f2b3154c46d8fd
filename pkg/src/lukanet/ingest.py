"""Nominal CSV loading, one-hot binarization, negative-case enrichment and
formula-generated tables."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, DatasetError
from .logic import DEFAULT_ROW_BUDGET, Formula, LogicGrain, truth_subtable

MISSING = "?"


@dataclass
class NominalTable:
    column_names: tuple[str, ...]  # attribute columns, target excluded
    rows: list[tuple[str, ...]]
    target_column: str
    positive_label: str
    labels: list[str]  # target token per row

    def __post_init__(self):
        self.column_names = tuple(self.column_names)
        if len(self.rows) != len(self.labels):
            raise DatasetError(f"{len(self.rows)} rows but {len(self.labels)} labels")
        for i, r in enumerate(self.rows):
            if len(r) != len(self.column_names):
                raise DatasetError(f"row {i} has {len(r)} fields, expected {len(self.column_names)}")
        distinct = set(self.labels)
        if len(distinct) != 2:
            raise DatasetError(
                f"target {self.target_column!r} needs exactly two labels, found {sorted(distinct)}"
            )
        if self.positive_label not in distinct:
            raise DatasetError(f"positive label {self.positive_label!r} never occurs")

    def __len__(self) -> int:
        return len(self.rows)

    def tokens(self) -> dict[str, list[str]]:
        """Distinct tokens per column in order of first appearance."""
        inv: dict[str, list[str]] = {}
        for j, name in enumerate(self.column_names):
            seen = dict.fromkeys(r[j] for r in self.rows)
            inv[name] = list(seen)
        return inv

    def positive_count(self) -> int:
        return sum(1 for y in self.labels if y == self.positive_label)


def load_nominal_csv(path, target_column: str, positive_label: str) -> NominalTable:
    """Read a headed CSV of nominal tokens; ``?`` stays an ordinary token."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if target_column not in header:
        raise DatasetError(f"{path}: no column {target_column!r}")
    t = header.index(target_column)
    body, labels = [], []
    for i, r in enumerate(rows[1:], 2):
        if len(r) != len(header):
            raise DatasetError(f"{path}:{i}: {len(r)} fields, header has {len(header)}")
        r = [v.strip() for v in r]
        labels.append(r[t])
        body.append(tuple(v for j, v in enumerate(r) if j != t))
    names = [h for j, h in enumerate(header) if j != t]
    return NominalTable(tuple(names), body, target_column, positive_label, labels)


@dataclass
class BinarizationMap:
    # source column -> tokens in output order; output column is "col=token"
    columns: dict[str, list[str]]

    @property
    def output_names(self) -> list[str]:
        return [f"{c}={tok}" for c, toks in self.columns.items() for tok in toks]

    def __len__(self) -> int:
        return sum(len(t) for t in self.columns.values())

    def to_dict(self) -> dict:
        return {"columns": {c: list(t) for c, t in self.columns.items()}}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def decode(self, data: Dataset) -> list[tuple[str, ...]]:
        """Recover the nominal rows from a binarized dataset."""
        rows = []
        x = data.inputs
        for i in range(len(data)):
            k, row = 0, []
            for toks in self.columns.values():
                block = x[i, k : k + len(toks)]
                hot = np.flatnonzero(block == 1.0)
                if len(hot) != 1:
                    raise DatasetError(f"row {i} is not one-hot")
                row.append(toks[int(hot[0])])
                k += len(toks)
            rows.append(tuple(row))
        return rows


def binarize(t: NominalTable) -> tuple[Dataset, BinarizationMap]:
    """One-hot expand every column; target is 1 for the positive label."""
    bmap = BinarizationMap(t.tokens())
    blocks = []
    for j, (name, toks) in enumerate(bmap.columns.items()):
        index = {tok: i for i, tok in enumerate(toks)}
        block = np.zeros((len(t), len(toks)))
        block[np.arange(len(t)), [index[r[j]] for r in t.rows]] = 1.0
        blocks.append(block)
    x = np.hstack(blocks) if blocks else np.zeros((len(t), 0))
    y = np.array([1.0 if v == t.positive_label else 0.0 for v in t.labels])
    return Dataset(x, y, bmap.output_names), bmap


def enrich_negatives(d: Dataset, factor: float = 0.5) -> Dataset:
    """Append a scaled copy of every row, labelled negative."""
    if not 0.0 <= factor <= 1.0:
        raise ValueError("factor must lie in [0, 1]")
    x = np.vstack([d.inputs, d.inputs * factor])
    y = np.concatenate([d.targets, np.zeros(len(d))])
    return Dataset(x, y, d.column_names)


def project_columns(d: Dataset, names: Sequence[str]) -> Dataset:
    unknown = [n for n in names if n not in d.column_names]
    if unknown:
        raise DatasetError(f"unknown columns {unknown}")
    idx = [d.column_names.index(n) for n in names]
    return Dataset(d.inputs[:, idx], d.targets.copy(), tuple(names))


def generate_table(
    f: Formula,
    grain: LogicGrain,
    noise_sigma: float = 0.0,
    seed: int = 0,
    names: Sequence[str] | None = None,
    budget: int = DEFAULT_ROW_BUDGET,
) -> Dataset:
    """Full truth sub-table of ``f``, with optional Gaussian noise on targets."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    table = truth_subtable(f, grain, budget, names=names)
    y = table.outputs.copy()
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        y = np.clip(y + rng.normal(0.0, noise_sigma, y.shape), 0.0, 1.0)
    return Dataset(table.inputs, y, table.variable_names)
