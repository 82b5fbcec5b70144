"""Apriori frequent itemsets and support/confidence/lift association rules.

Support counting uses one Python-int bitset per item (bit r set when row r
holds the item), so the support of an itemset is the popcount of the AND of
its members. Threshold tests are done on exact rationals built from the
decimal text of each threshold, which keeps boundary cases like a support of
exactly 0.05 from flipping on float rounding.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from crashrules.encode import TransactionSet


def exact(value: float | int | str | Fraction) -> Fraction:
    """Rational for a threshold, read from its shortest decimal repr (0.05 -> 1/20)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class Thresholds:
    min_support: float = 0.05
    min_confidence: float = 0.6
    min_lift: float = 1.2
    max_length: int = 3

    def __post_init__(self):
        if not 0 < self.min_support <= 1:
            raise ValueError(f"min_support must be in (0, 1], got {self.min_support}")
        if not 0 < self.min_confidence <= 1:
            raise ValueError(f"min_confidence must be in (0, 1], got {self.min_confidence}")
        if not self.min_lift >= 0:
            raise ValueError(f"min_lift must be >= 0, got {self.min_lift}")
        if int(self.max_length) != self.max_length or self.max_length < 2:
            raise ValueError(f"max_length must be an integer >= 2, got {self.max_length}")

    def to_dict(self) -> dict:
        return {
            "min_support": self.min_support,
            "min_confidence": self.min_confidence,
            "min_lift": self.min_lift,
            "max_length": self.max_length,
        }


@dataclass(frozen=True, order=True)
class Itemset:
    items: tuple[int, ...]
    count: int
    n: int

    @property
    def support(self) -> float:
        return self.count / self.n

    @property
    def support_exact(self) -> Fraction:
        return Fraction(self.count, self.n)


@dataclass(frozen=True)
class Rule:
    antecedent: Itemset
    consequent: Itemset
    count: int
    n: int
    antecedent_names: tuple[str, ...]
    consequent_names: tuple[str, ...]

    @property
    def support(self) -> float:
        return self.count / self.n

    @property
    def confidence(self) -> float:
        return self.support / self.antecedent.support

    @property
    def lift(self) -> float:
        return self.confidence / self.consequent.support

    @property
    def confidence_exact(self) -> Fraction:
        return Fraction(self.count, self.antecedent.count)

    @property
    def lift_exact(self) -> Fraction:
        return Fraction(self.count * self.n, self.antecedent.count * self.consequent.count)

    @property
    def length(self) -> int:
        return len(self.antecedent.items) + len(self.consequent.items)

    def key(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        return self.antecedent_names, self.consequent_names

    def to_row(self, cluster: int | None = None) -> dict:
        row = {} if cluster is None else {"cluster": cluster}
        row.update(
            antecedent=" + ".join(self.antecedent_names),
            consequent=" + ".join(self.consequent_names),
            support=self.support,
            confidence=self.confidence,
            lift=self.lift,
        )
        return row


RULE_FIELDS = ["cluster", "antecedent", "consequent", "support", "confidence", "lift"]


class _Bitsets:
    def __init__(self, transactions: TransactionSet):
        self.n = transactions.n_rows
        if self.n == 0:
            raise ValueError("transaction set is empty")
        self.items = list(transactions.items)
        self.bits = []
        for j in range(len(self.items)):
            packed = np.packbits(transactions.matrix[:, j], bitorder="little").tobytes()
            self.bits.append(int.from_bytes(packed, "little"))

    def bitset(self, items: Iterable[int]) -> int:
        it = iter(items)
        try:
            acc = self.bits[next(it)]
        except StopIteration:
            return (1 << self.n) - 1
        for i in it:
            acc &= self.bits[i]
        return acc

    def count(self, items: Iterable[int]) -> int:
        return self.bitset(items).bit_count()


def support(itemset: Sequence[int] | Itemset, transactions: TransactionSet) -> float:
    """Fraction of rows holding every item of ``itemset``."""
    items = itemset.items if isinstance(itemset, Itemset) else tuple(itemset)
    bits = _Bitsets(transactions)
    bad = [i for i in items if not 0 <= i < len(bits.items)]
    if bad:
        raise IndexError(f"item index {bad[0]} out of range")
    return bits.count(items) / bits.n


def min_count(min_support: float, n: int) -> int:
    return math.ceil(exact(min_support) * n)


def apriori(transactions: TransactionSet, min_support: float, max_length: int | None = None) -> list[Itemset]:
    """All itemsets with support >= ``min_support`` and at most ``max_length`` items.

    Level-wise: k-candidates join two frequent (k-1)-itemsets sharing their
    first k-2 items, and survive only if every (k-1)-subset is frequent.
    Output is sorted by size, then item indices.
    """
    if not 0 < min_support <= 1:
        raise ValueError(f"min_support must be in (0, 1], got {min_support}")
    if max_length is not None and max_length < 1:
        raise ValueError(f"max_length must be >= 1, got {max_length}")
    bits = _Bitsets(transactions)
    need = min_count(min_support, bits.n)

    level: dict[tuple[int, ...], int] = {}
    for i, b in enumerate(bits.bits):
        if b.bit_count() >= need:
            level[(i,)] = b
    found = [Itemset(k, b.bit_count(), bits.n) for k, b in level.items()]
    size = 1
    while level and (max_length is None or size < max_length):
        keys = sorted(level)
        nxt: dict[tuple[int, ...], int] = {}
        for a_idx, a in enumerate(keys):
            for b in keys[a_idx + 1:]:
                if a[:-1] != b[:-1]:
                    break
                cand = a + (b[-1],)
                if any(cand[:j] + cand[j + 1:] not in level for j in range(len(cand) - 2)):
                    continue
                cand_bits = level[a] & bits.bits[b[-1]]
                if cand_bits.bit_count() >= need:
                    nxt[cand] = cand_bits
        found.extend(Itemset(k, b.bit_count(), bits.n) for k, b in nxt.items())
        level = nxt
        size += 1
    return sorted(found, key=lambda s: (len(s.items), s.items))


def generate_rules(
    frequent: Sequence[Itemset], transactions: TransactionSet, thresholds: Thresholds
) -> list[Rule]:
    """Split every frequent itemset of 2..max_length items into rules A -> F minus A.

    A rule is kept when support, confidence and lift all clear their
    thresholds. Rules come back sorted by antecedent then consequent names.
    """
    names = list(transactions.items)
    n = transactions.n_rows
    counts = {s.items: s.count for s in frequent}
    bits = None
    s_min = exact(thresholds.min_support)
    c_min = exact(thresholds.min_confidence)
    l_min = exact(thresholds.min_lift)

    def count_of(items: tuple[int, ...]) -> int:
        nonlocal bits
        if items not in counts:
            if bits is None:
                bits = _Bitsets(transactions)
            counts[items] = bits.count(items)
        return counts[items]

    rules = []
    for f in frequent:
        size = len(f.items)
        if size < 2 or size > thresholds.max_length:
            continue
        if Fraction(f.count, n) < s_min:
            continue
        for r in range(1, size):
            for ante in combinations(f.items, r):
                cons = tuple(i for i in f.items if i not in ante)
                ca, cb = count_of(ante), count_of(cons)
                if Fraction(f.count, ca) < c_min:
                    continue
                if Fraction(f.count * n, ca * cb) < l_min:
                    continue
                rules.append(
                    Rule(
                        Itemset(ante, ca, n),
                        Itemset(cons, cb, n),
                        f.count,
                        n,
                        tuple(names[i] for i in ante),
                        tuple(names[i] for i in cons),
                    )
                )
    rules.sort(key=Rule.key)
    return rules


def rank_key(rule: Rule):
    return (-rule.lift_exact, -rule.confidence_exact, -Fraction(rule.count, rule.n), rule.antecedent_names, rule.consequent_names)


def rank_rules(rules: Iterable[Rule], top_n: int | None = None) -> list[Rule]:
    """Strongest rules first: lift, then confidence, then support, then item names."""
    ranked = sorted(rules, key=rank_key)
    return ranked if top_n is None else ranked[:top_n]


def mine(transactions: TransactionSet, thresholds: Thresholds) -> list[Rule]:
    frequent = apriori(transactions, thresholds.min_support, thresholds.max_length)
    return generate_rules(frequent, transactions, thresholds)


def write_rules_csv(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RULE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_rules_json(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(list(rows), fh, indent=2, ensure_ascii=False)
        fh.write("\n")
