"""Label and one-hot encodings of a FeatureTable."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from crashrules.ingest import FeatureTable


@dataclass
class LabelEncodedMatrix:
    columns: list[str]
    codes: np.ndarray  # (rows, columns) int64
    dictionaries: list[list[str]]

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape

    def decode(self) -> FeatureTable:
        rows = [
            tuple(self.dictionaries[j][c] for j, c in enumerate(row))
            for row in self.codes.tolist()
        ]
        return FeatureTable(list(self.columns), rows)

    def as_points(self, scale: bool = False) -> np.ndarray:
        """Codes as float points for K-means, optionally min-max scaled per column."""
        points = self.codes.astype(np.float64)
        if scale:
            span = np.array([max(len(d) - 1, 1) for d in self.dictionaries], dtype=np.float64)
            points = points / span
        return points

    def to_files(self, csv_path: str | Path, json_path: str | Path) -> None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            writer.writerows(self.codes.tolist())
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(dict(zip(self.columns, self.dictionaries)), fh, indent=2, ensure_ascii=False)
            fh.write("\n")

    @classmethod
    def from_files(cls, csv_path: str | Path, json_path: str | Path) -> "LabelEncodedMatrix":
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            columns = next(reader)
            codes = np.array([[int(c) for c in row] for row in reader], dtype=np.int64)
        with open(json_path, encoding="utf-8") as fh:
            dicts = json.load(fh)
        return cls(columns, codes.reshape(-1, len(columns)), [dicts[c] for c in columns])


def label_encode(table: FeatureTable) -> LabelEncodedMatrix:
    """Integer-code every column by its lexicographically sorted categories."""
    dictionaries = [sorted(set(table.column(c))) for c in table.columns]
    lookup = [{v: i for i, v in enumerate(d)} for d in dictionaries]
    codes = np.array(
        [[lookup[j][v] for j, v in enumerate(row)] for row in table.rows],
        dtype=np.int64,
    ).reshape(len(table.rows), len(table.columns))
    return LabelEncodedMatrix(list(table.columns), codes, dictionaries)


@dataclass
class TransactionSet:
    """Boolean rows x items matrix; item names read ``column=value``."""

    items: list[str]
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=bool)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.items):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match {len(self.items)} items")

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def item_counts(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    def subset_rows(self, indices) -> "TransactionSet":
        return TransactionSet(list(self.items), self.matrix[np.asarray(indices, dtype=np.int64)])

    def select_items(self, keep) -> "TransactionSet":
        keep = np.asarray(keep, dtype=np.int64)
        return TransactionSet([self.items[i] for i in keep], self.matrix[:, keep])

    @classmethod
    def from_itemsets(cls, rows: list[set[str]], items: list[str] | None = None) -> "TransactionSet":
        """Build from per-row item sets (handy for tests and small examples)."""
        if items is None:
            items = sorted(set().union(*rows)) if rows else []
        index = {name: i for i, name in enumerate(items)}
        matrix = np.zeros((len(rows), len(items)), dtype=bool)
        for r, row in enumerate(rows):
            for name in row:
                matrix[r, index[name]] = True
        return cls(list(items), matrix)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.items)
            writer.writerows(self.matrix.astype(np.int8).tolist())

    @classmethod
    def from_csv(cls, path: str | Path) -> "TransactionSet":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            items = next(reader)
            rows = [[c == "1" for c in row] for row in reader]
        return cls(items, np.array(rows, dtype=bool).reshape(len(rows), len(items)))


def item_name(column: str, value: str) -> str:
    return f"{column}={value}"


def one_hot(table: FeatureTable) -> TransactionSet:
    """Expand each column into one indicator per distinct value.

    Items are grouped by column in table order; within a column, values are
    sorted lexicographically.
    """
    items: list[str] = []
    blocks = []
    for j, col in enumerate(table.columns):
        values = sorted({row[j] for row in table.rows})
        index = {v: i for i, v in enumerate(values)}
        block = np.zeros((len(table.rows), len(values)), dtype=bool)
        for r, row in enumerate(table.rows):
            block[r, index[row[j]]] = True
        items.extend(item_name(col, v) for v in values)
        blocks.append(block)
    matrix = np.hstack(blocks) if blocks else np.zeros((len(table.rows), 0), dtype=bool)
    return TransactionSet(items, matrix)
