"""Cluster-then-mine orchestration: ingest, encode, K-means, per-cluster Apriori."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from crashrules import arm
from crashrules._parallel import ordered_map
from crashrules.arm import Rule, Thresholds
from crashrules.cluster import ClusterModel, ElbowCurve, kmeans_fit, wcss_sweep
from crashrules.encode import TransactionSet, label_encode, one_hot
from crashrules.ingest import MONTHS, FeatureTable, IngestConfig, ingest

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_PROFILE_COLUMNS = ("Automation System", "Automation Level", "Roadway Type", "Make", "Speed Bin")


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names which one."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class ConfigError(ValueError):
    pass


def _reject_unknown(d: Mapping[str, Any], allowed: set[str], where: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key in {where}: {extra[0]!r}")


def _thresholds(d: Mapping[str, Any], base: Thresholds | None = None) -> Thresholds:
    _reject_unknown(d, {"min_support", "min_confidence", "min_lift", "max_length"}, "thresholds")
    merged = {**(base or Thresholds()).to_dict(), **d}
    return Thresholds(
        float(merged["min_support"]),
        float(merged["min_confidence"]),
        float(merged["min_lift"]),
        int(merged["max_length"]),
    )


@dataclass(frozen=True)
class PipelineConfig:
    ingest: IngestConfig
    k_range: tuple[int, int] = (2, 10)
    k: int | None = None
    seed: int = 0
    restarts: int = 10
    max_iter: int = 300
    scale: bool = False
    thresholds: Thresholds = field(default_factory=Thresholds)
    cluster_thresholds: Mapping[int, Thresholds] = field(default_factory=dict)
    sparse_floor: float | None = None
    top_n: int = 10
    profile_columns: tuple[str, ...] = DEFAULT_PROFILE_COLUMNS

    def __post_init__(self):
        lo, hi = self.k_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"k_range must satisfy 1 <= low <= high, got {self.k_range}")
        if self.k is not None and self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.restarts < 1 or self.max_iter < 1:
            raise ConfigError("restarts and max_iter must be >= 1")
        if self.top_n < 0:
            raise ConfigError(f"top_n must be >= 0, got {self.top_n}")
        if self.sparse_floor is not None:
            if not 0 <= self.sparse_floor <= 1:
                raise ConfigError(f"sparse_floor must be in [0, 1], got {self.sparse_floor}")
            for th in [self.thresholds, *self.cluster_thresholds.values()]:
                if self.sparse_floor > th.min_support:
                    raise ConfigError(f"sparse_floor {self.sparse_floor} exceeds min_support {th.min_support}")

    def thresholds_for(self, cluster: int) -> Thresholds:
        return self.cluster_thresholds.get(cluster, self.thresholds)

    def floor_for(self, cluster: int) -> float:
        return self.thresholds_for(cluster).min_support if self.sparse_floor is None else self.sparse_floor

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PipelineConfig":
        allowed = {
            "schema_version", "ingest", "k_range", "k", "seed", "restarts", "max_iter", "scale",
            "thresholds", "cluster_thresholds", "sparse_floor", "top_n", "profile_columns",
        }
        _reject_unknown(d, allowed, "config")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        if "ingest" not in d:
            raise ConfigError("config missing 'ingest'")
        base = _thresholds(d.get("thresholds", {}))
        per_cluster = {int(c): _thresholds(t, base) for c, t in d.get("cluster_thresholds", {}).items()}
        kwargs: dict[str, Any] = {}
        if "k_range" in d:
            lo, hi = d["k_range"]
            kwargs["k_range"] = (int(lo), int(hi))
        for key, conv in (("k", int), ("seed", int), ("restarts", int), ("max_iter", int),
                          ("scale", bool), ("sparse_floor", float), ("top_n", int)):
            if d.get(key) is not None:
                kwargs[key] = conv(d[key])
        if "profile_columns" in d:
            kwargs["profile_columns"] = tuple(d["profile_columns"])
        return cls(
            ingest=IngestConfig.from_dict(d["ingest"]),
            thresholds=base,
            cluster_thresholds=per_cluster,
            **kwargs,
        )

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "ingest": self.ingest.to_dict(),
            "k_range": list(self.k_range),
            "k": self.k,
            "seed": self.seed,
            "restarts": self.restarts,
            "max_iter": self.max_iter,
            "scale": self.scale,
            "thresholds": self.thresholds.to_dict(),
            "cluster_thresholds": {str(c): t.to_dict() for c, t in sorted(self.cluster_thresholds.items())},
            "sparse_floor": self.sparse_floor,
            "top_n": self.top_n,
            "profile_columns": list(self.profile_columns),
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def filter_sparse(transactions: TransactionSet, sparse_floor: float) -> TransactionSet:
    """Drop item columns whose support within ``transactions`` is below ``sparse_floor``."""
    if not 0 <= sparse_floor <= 1:
        raise ValueError(f"sparse_floor must be in [0, 1], got {sparse_floor}")
    if sparse_floor == 0:
        return transactions
    need = math.ceil(arm.exact(sparse_floor) * transactions.n_rows)
    keep = np.flatnonzero(transactions.item_counts() >= need)
    if len(keep) == 0:
        raise ValueError(f"every item column is below the sparse floor {sparse_floor}")
    return transactions.select_items(keep)


@dataclass
class ClusterProfile:
    cluster: int
    size: int
    modes: dict[str, tuple[str, float]]
    highlights: dict[str, dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "cluster": self.cluster,
            "size": self.size,
            "modes": {c: {"value": v, "share": s} for c, (v, s) in self.modes.items()},
            "highlights": self.highlights,
        }


def _ranked_counts(values: Sequence[str]) -> list[tuple[str, int]]:
    return sorted(Counter(values).items(), key=lambda kv: (-kv[1], kv[0]))


def profile_clusters(
    table: FeatureTable, assignments: Sequence[int], highlight: Sequence[str] = DEFAULT_PROFILE_COLUMNS
) -> list[ClusterProfile]:
    """Modal value and its share for every column of every cluster.

    ``highlight`` columns present in the table additionally get their full
    share distribution. Mode ties go to the lexicographically smallest value.
    """
    assignments = np.asarray(assignments)
    if len(assignments) != len(table.rows):
        raise ValueError(f"{len(assignments)} assignments for {len(table.rows)} rows")
    profiles = []
    for c in sorted(set(assignments.tolist())):
        sub = table.subset(np.flatnonzero(assignments == c).tolist())
        n = len(sub.rows)
        modes = {}
        highlights = {}
        for col in table.columns:
            ranked = _ranked_counts(sub.column(col))
            modes[col] = (ranked[0][0], ranked[0][1] / n)
            if col in highlight:
                highlights[col] = {v: cnt / n for v, cnt in ranked}
        profiles.append(ClusterProfile(int(c), n, modes, highlights))
    return profiles


def _hour_key(v: str):
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


def _month_key(v: str):
    return (MONTHS.index(v), v) if v in MONTHS else (len(MONTHS), v)


def summarize_exploratory(table: FeatureTable) -> dict[str, tuple[list[str], list[list]]]:
    """Plot-ready frequency tables: one per column plus an hour x month crash grid."""
    n = len(table.rows)
    out: dict[str, tuple[list[str], list[list]]] = {}
    for col in table.columns:
        rows = [[v, cnt, cnt / n] for v, cnt in _ranked_counts(table.column(col))]
        out[f"freq_{_slug(col)}"] = (["value", "count", "share"], rows)
    if "Hour" in table.columns and "Month" in table.columns:
        hours = table.column("Hour")
        months = table.column("Month")
        pairs = Counter(zip(hours, months))
        hour_vals = sorted(set(hours), key=_hour_key)
        month_vals = sorted(set(months), key=_month_key)
        grid = [[h] + [pairs.get((h, m), 0) for m in month_vals] for h in hour_vals]
        out["hour_by_month"] = (["Hour"] + month_vals, grid)
    return out


def _slug(name: str) -> str:
    return re.sub(r"[^0-9A-Za-z]+", "_", name).strip("_").lower()


@dataclass
class ClusterRules:
    cluster: int
    thresholds: Thresholds
    items_before: int
    items_after: int
    frequent_itemsets: int
    rules: list[Rule]  # ranked, strongest first


@dataclass
class RunReport:
    config: PipelineConfig
    table: FeatureTable
    assignments: np.ndarray
    model: ClusterModel
    elbow: ElbowCurve | None
    profiles: list[ClusterProfile]
    clusters: list[ClusterRules]

    @property
    def k(self) -> int:
        return self.model.k

    @property
    def rule_counts(self) -> dict[int, int]:
        return {c.cluster: len(c.rules) for c in self.clusters}

    def rule_rows(self) -> list[dict]:
        return [r.to_row(c.cluster) for c in self.clusters for r in c.rules]

    def to_dict(self) -> dict:
        counts = self.rule_counts
        return {
            "config_hash": self.config.config_hash(),
            "thresholds": self.config.thresholds.to_dict(),
            "cluster_thresholds": {str(c.cluster): c.thresholds.to_dict() for c in self.clusters},
            "provenance": self.table.provenance,
            "table_shape": list(self.table.shape),
            "elbow": None if self.elbow is None else {
                "points": [[k, w] for k, w in self.elbow.points],
                "chosen_k": self.elbow.chosen_k,
            },
            "k": self.k,
            "k_source": "fixed" if self.elbow is None else "elbow",
            "kmeans": {
                "wcss": self.model.wcss,
                "iterations": self.model.iterations,
                "converged": self.model.converged,
                "seed": self.model.seed,
                "restart": self.model.restart,
            },
            "cluster_sizes": {str(c): s for c, s in enumerate(self.model.sizes)},
            "profiles": [p.to_dict() for p in self.profiles],
            "rule_counts": {str(c): v for c, v in counts.items()},
            "total_rules": sum(counts.values()),
            "mining": {
                str(c.cluster): {
                    "items_before_filter": c.items_before,
                    "items_after_filter": c.items_after,
                    "frequent_itemsets": c.frequent_itemsets,
                }
                for c in self.clusters
            },
            "top_rules": {
                str(c.cluster): [r.to_row() for r in c.rules[: self.config.top_n]]
                for c in self.clusters
            },
        }


def _stage(name: str):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PipelineError:
                raise
            except (ValueError, OSError, KeyError) as exc:
                raise PipelineError(name, str(exc)) from exc
        return inner
    return wrap


@_stage("ingest")
def _ingest(config: PipelineConfig, input_path) -> FeatureTable:
    return ingest(input_path, config.ingest)


@_stage("cluster")
def _cluster(config: PipelineConfig, points: np.ndarray, n_jobs) -> tuple[ClusterModel, ElbowCurve | None]:
    if config.k is not None:
        return kmeans_fit(points, config.k, config.seed, config.max_iter, config.restarts, n_jobs), None
    lo, hi = config.k_range
    curve = wcss_sweep(points, range(lo, hi + 1), config.seed, config.restarts, config.max_iter, n_jobs)
    return curve.models[curve.chosen_k], curve


def mine_cluster(transactions: TransactionSet, cluster: int, thresholds: Thresholds, floor: float) -> ClusterRules:
    filtered = filter_sparse(transactions, floor)
    frequent = arm.apriori(filtered, thresholds.min_support, thresholds.max_length)
    rules = arm.generate_rules(frequent, filtered, thresholds)
    return ClusterRules(
        cluster, thresholds, len(transactions.items), len(filtered.items), len(frequent), arm.rank_rules(rules)
    )


@_stage("mine")
def _mine(config: PipelineConfig, table: FeatureTable, assignments: np.ndarray, n_jobs) -> list[ClusterRules]:
    transactions = one_hot(table)
    ids = sorted(set(assignments.tolist()))

    def one(c: int) -> ClusterRules:
        sub = transactions.subset_rows(np.flatnonzero(assignments == c))
        try:
            return mine_cluster(sub, c, config.thresholds_for(c), config.floor_for(c))
        except ValueError as exc:
            raise ValueError(f"cluster {c}: {exc}") from exc

    return ordered_map(one, ids, n_jobs)


def run_pipeline(config: PipelineConfig, input_path: str | Path, n_jobs: int | None = None) -> RunReport:
    """Ingest, label-encode, cluster (elbow or fixed k), then mine each cluster."""
    table = _ingest(config, input_path)
    try:
        points = label_encode(table).as_points(scale=config.scale)
    except ValueError as exc:
        raise PipelineError("encode", str(exc)) from exc
    model, curve = _cluster(config, points, n_jobs)
    assignments = model.assignments
    log.info("k=%d, cluster sizes %s", model.k, model.sizes)
    clusters = _mine(config, table, assignments, n_jobs)
    try:
        profiles = profile_clusters(table, assignments, config.profile_columns)
    except ValueError as exc:
        raise PipelineError("profile", str(exc)) from exc
    return RunReport(config, table, assignments, model, curve, profiles, clusters)


def mine_table(table: FeatureTable, config: PipelineConfig, assignments: Sequence[int] | None = None,
               n_jobs: int | None = None) -> list[ClusterRules]:
    """Mine an already-cleaned table, whole or split by given cluster labels."""
    labels = np.zeros(len(table.rows), dtype=np.int64) if assignments is None else np.asarray(assignments)
    if len(labels) != len(table.rows):
        raise PipelineError("mine", f"{len(labels)} assignments for {len(table.rows)} rows")
    return _mine(config, table, labels, n_jobs)


# ---- file output -------------------------------------------------------


def write_json(path: Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def write_table(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in rows])


def write_rules(run_dir: Path, clusters: Sequence[ClusterRules]) -> None:
    all_rows = []
    for c in clusters:
        rows = [r.to_row(c.cluster) for r in c.rules]
        arm.write_rules_csv(run_dir / f"rules_cluster_{c.cluster}.csv", rows)
        all_rows.extend(rows)
    arm.write_rules_json(run_dir / "rules.json", all_rows)


def write_exploratory(run_dir: Path, table: FeatureTable) -> list[Path]:
    out_dir = run_dir / "exploratory"
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, (header, rows) in summarize_exploratory(table).items():
        path = out_dir / f"{name}.csv"
        write_table(path, header, rows)
        paths.append(path)
    return paths


def write_report(report: RunReport, run_dir: Path) -> None:
    """Write every artifact of a pipeline run into ``run_dir``."""
    run_dir.mkdir(parents=True, exist_ok=True)
    report.table.to_csv(run_dir / "cleaned.csv")
    write_json(run_dir / "provenance.json", report.table.provenance)
    if report.elbow is not None:
        report.elbow.to_csv(run_dir / "elbow.csv")
    write_json(run_dir / "model.json", report.model.to_dict())
    write_json(run_dir / "profiles.json", [p.to_dict() for p in report.profiles])
    write_rules(run_dir, report.clusters)
    write_json(run_dir / "report.json", report.to_dict())


def exact_rule_metrics(table: FeatureTable, rows: Sequence[int], antecedent, consequent) -> tuple[Fraction, Fraction, Fraction]:
    """Support, confidence and lift of a rule counted straight from table cells.

    Independent of the bitset path; used to re-verify emitted rules.
    """
    cols = {c: j for j, c in enumerate(table.columns)}

    def holds(row, items) -> bool:
        for item in items:
            col, val = item.split("=", 1)
            if row[cols[col]] != val:
                return False
        return True

    sub = [table.rows[i] for i in rows]
    n = len(sub)
    a = sum(holds(r, antecedent) for r in sub)
    b = sum(holds(r, consequent) for r in sub)
    ab = sum(holds(r, tuple(antecedent) + tuple(consequent)) for r in sub)
    sup = Fraction(ab, n)
    conf = Fraction(ab, a) if a else Fraction(0)
    lift = Fraction(ab * n, a * b) if a and b else Fraction(0)
    return sup, conf, lift
