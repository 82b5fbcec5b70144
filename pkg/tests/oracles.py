"""Brute-force reference computations, kept independent of the package code paths."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np


def powerset_frequent(rows: list[set[int]], n_items: int, min_support: float, max_len: int | None = None):
    """{itemset tuple: count} for every itemset whose support >= min_support (exact rationals)."""
    n = len(rows)
    need = Fraction(repr(min_support)) * n
    top = n_items if max_len is None else min(max_len, n_items)
    out = {}
    for size in range(1, top + 1):
        for combo in combinations(range(n_items), size):
            count = sum(1 for r in rows if set(combo) <= r)
            if count >= need:
                out[combo] = count
    return out


def partition_wcss(points: np.ndarray, labels) -> float:
    total = 0.0
    labels = np.asarray(labels)
    for c in set(labels.tolist()):
        members = points[labels == c]
        total += float(((members - members.mean(axis=0)) ** 2).sum())
    return total


def best_two_partition(points: np.ndarray) -> tuple[float, tuple[int, ...]]:
    """Global optimum WCSS over every split of the points into two non-empty groups."""
    n = len(points)
    best = (float("inf"), ())
    # Fix point 0 in group 0 so each split is visited once.
    for mask in range(1, 2 ** (n - 1)):
        labels = [0] + [(mask >> (i - 1)) & 1 for i in range(1, n)]
        w = partition_wcss(points, labels)
        if w < best[0]:
            best = (w, tuple(labels))
    return best


def chord_knee(points: list[tuple[int, float]]) -> list[float]:
    """Plain-Python perpendicular distances after rank / min-max normalization."""
    m = len(points)
    ws = [w for _, w in points]
    lo, hi = min(ws), max(ws)
    xs = [i / (m - 1) for i in range(m)]
    ys = [(w - lo) / (hi - lo) for w in ws]
    (x0, y0), (x1, y1) = (xs[0], ys[0]), (xs[-1], ys[-1])
    norm = ((x1 - x0) ** 2 + (y1 - y0) ** 2) ** 0.5
    return [abs((y1 - y0) * x - (x1 - x0) * y + x1 * y0 - y1 * x0) / norm for x, y in zip(xs, ys)]


def powerset_counts(rows: list[set[int]], n_items: int) -> dict[tuple[int, ...], int]:
    """Row count of every non-empty subset of ``range(n_items)``, by bitmask enumeration."""
    row_masks = np.array([sum(1 << i for i in r) for r in rows], dtype=np.int64)
    masks = np.arange(1, 1 << n_items, dtype=np.int64)
    counts = ((row_masks[None, :] & masks[:, None]) == masks[:, None]).sum(axis=1)
    out = {}
    for m, c in zip(masks.tolist(), counts.tolist()):
        out[tuple(i for i in range(n_items) if m >> i & 1)] = c
    return out
