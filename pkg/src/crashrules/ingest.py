"""Crash-report ingestion: parse, dedupe, tag, impute and bin into a FeatureTable."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

log = logging.getLogger(__name__)

KINDS = ("categorical", "numeric", "timestamp", "narrative")
ROLES = ("keep", "drop-redundant")

UNKNOWN = "Unknown"
DEFAULT_SENTINELS = ("", "NA", "N/A", "NaN", "nan", "NULL", "null", "None")

LEVEL_COLUMN = "Automation Level"
DEFAULT_LEVEL_KEYWORDS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("2", ("level 2", "l2")),
    ("3", ("level 3", "l3")),
    ("4", ("level 4", "l4", "4th", "5th gen")),
)
DEFAULT_SYSTEM_LEVELS = {"ADAS": "2", "ADS": "4"}

MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)
DATE_FORMATS = ("%Y-%m-%d", "%m/%d/%Y", "%Y/%m/%d", "%d-%b-%Y", "%Y-%m-%d %H:%M:%S", "%m/%d/%Y %H:%M")
# SGO publishes some dates as month-year only; these yield no Day.
MONTH_YEAR_FORMATS = ("%b-%Y", "%B %Y", "%Y-%m")
TIME_FORMATS = ("%H:%M", "%H:%M:%S", "%I:%M %p", "%I:%M:%S %p")


class IngestError(ValueError):
    """Raised when input data or ingest configuration is unusable."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str = "categorical"
    role: str = "keep"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise IngestError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise IngestError(f"column {self.name!r}: unknown role {self.role!r}")


@dataclass(frozen=True)
class BinSpec:
    """Right-closed bins over ``[lower, edges[0]], (edges[0], edges[1]], ...``.

    The final label covers everything above the last edge, so ``labels`` has
    one more entry than ``edges``.
    """

    column: str
    edges: tuple[float, ...]
    labels: tuple[str, ...]
    lower: float = 0.0
    output: str | None = None

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != len(edges) + 1:
            raise IngestError(f"bins for {self.column!r}: need {len(edges) + 1} labels, got {len(self.labels)}")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise IngestError(f"bins for {self.column!r}: edges must be strictly increasing")
        if edges and edges[0] < self.lower:
            raise IngestError(f"bins for {self.column!r}: first edge below lower bound")

    @property
    def output_column(self) -> str:
        return self.output or f"{self.column} Bin"

    def label(self, value: float) -> str:
        if value < self.lower:
            raise IngestError(f"{self.column}: value {value} below lowest bin bound {self.lower}")
        for edge, label in zip(self.edges, self.labels):
            if value <= edge:
                return label
        return self.labels[-1]

    @classmethod
    def preset(cls, name: str, column: str, output: str | None = None) -> "BinSpec":
        if name == "speed":
            return cls(column, (10, 60), ("0-10 mph", "11-60 mph", "61+ mph"), output=output)
        if name == "mileage":
            return cls(column, (10_000, 30_000, 60_000), ("0-10k", "10k-30k", "30k-60k", "60k+"), output=output)
        if name == "tens":
            edges = tuple(range(10, 90, 10))
            labels = ["0-10 mph"] + [f"{e - 9}-{e} mph" for e in edges[1:]] + ["81+ mph"]
            return cls(column, edges, tuple(labels), output=output)
        raise IngestError(f"unknown bin preset {name!r}")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "BinSpec":
        _reject_unknown(d, {"column", "preset", "edges", "labels", "lower", "output"}, "bins entry")
        if "column" not in d:
            raise IngestError("bins entry missing 'column'")
        if "preset" in d:
            return cls.preset(d["preset"], d["column"], d.get("output"))
        return cls(d["column"], tuple(d["edges"]), tuple(d["labels"]), float(d.get("lower", 0.0)), d.get("output"))

    def to_dict(self) -> dict:
        return {
            "column": self.column,
            "edges": list(self.edges),
            "labels": list(self.labels),
            "lower": self.lower,
            "output": self.output_column,
        }


@dataclass(frozen=True)
class IngestConfig:
    columns: tuple[ColumnSpec, ...]
    id_column: str = "Report ID"
    date_column: str | None = None
    time_column: str | None = None
    narrative_column: str | None = None
    version_column: str | None = None
    system_column: str | None = None
    sentinels: tuple[str, ...] = DEFAULT_SENTINELS
    missing_threshold: float = 0.5
    bins: tuple[BinSpec, ...] = ()
    level_keywords: tuple[tuple[str, tuple[str, ...]], ...] = DEFAULT_LEVEL_KEYWORDS
    exclude_levels: tuple[str, ...] = ("3",)
    # "error" rejects headers missing from ``columns``; "drop" treats them as redundant.
    other_columns: str = "error"

    def __post_init__(self):
        if not 0 < self.missing_threshold <= 1:
            raise IngestError(f"missing_threshold must be in (0, 1], got {self.missing_threshold}")
        if self.other_columns not in ("error", "drop"):
            raise IngestError(f"other_columns must be 'error' or 'drop', got {self.other_columns!r}")
        names = [c.name for c in self.columns]
        dupes = sorted(n for n, c in Counter(names).items() if c > 1)
        if dupes:
            raise IngestError(f"column specified more than once: {dupes[0]!r}")
        if self.id_column not in names:
            raise IngestError(f"id column {self.id_column!r} has no ColumnSpec")

    @property
    def spec_by_name(self) -> dict[str, ColumnSpec]:
        return {c.name: c for c in self.columns}

    @property
    def tags_levels(self) -> bool:
        return any((self.version_column, self.narrative_column, self.system_column))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "IngestConfig":
        allowed = {
            "columns", "id_column", "date_column", "time_column", "narrative_column",
            "version_column", "system_column", "sentinels", "missing_threshold", "bins",
            "level_keywords", "exclude_levels", "other_columns",
        }
        _reject_unknown(d, allowed, "ingest")
        if "columns" not in d:
            raise IngestError("ingest config missing 'columns'")
        columns = []
        for c in d["columns"]:
            _reject_unknown(c, {"name", "kind", "role"}, "column spec")
            columns.append(ColumnSpec(c["name"], c.get("kind", "categorical"), c.get("role", "keep")))
        kwargs: dict[str, Any] = {k: d[k] for k in allowed & d.keys() if k not in ("columns", "bins", "level_keywords")}
        for key in ("sentinels", "exclude_levels"):
            if key in kwargs:
                kwargs[key] = tuple(str(v) for v in kwargs[key])
        if "level_keywords" in d:
            kwargs["level_keywords"] = tuple((str(level), tuple(kws)) for level, kws in d["level_keywords"].items())
        bins = tuple(BinSpec.from_dict(b) for b in d.get("bins", ()))
        return cls(columns=tuple(columns), bins=bins, **kwargs)

    def to_dict(self) -> dict:
        return {
            "columns": [{"name": c.name, "kind": c.kind, "role": c.role} for c in self.columns],
            "id_column": self.id_column,
            "date_column": self.date_column,
            "time_column": self.time_column,
            "narrative_column": self.narrative_column,
            "version_column": self.version_column,
            "system_column": self.system_column,
            "sentinels": list(self.sentinels),
            "missing_threshold": self.missing_threshold,
            "bins": [b.to_dict() for b in self.bins],
            "level_keywords": {level: list(kws) for level, kws in self.level_keywords},
            "exclude_levels": list(self.exclude_levels),
            "other_columns": self.other_columns,
        }


@dataclass(frozen=True)
class RawRecord:
    report_id: str
    fields: dict[str, Any]

    def __post_init__(self):
        if not self.report_id:
            raise IngestError("report_id must be non-empty")

    def with_fields(self, fields: dict[str, Any]) -> "RawRecord":
        return replace(self, fields=fields)


@dataclass
class FeatureTable:
    """Cleaned categorical table: every cell is a non-empty label."""

    columns: list[str]
    rows: list[tuple[str, ...]]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise IngestError(f"row {i} has {len(row)} cells, expected {width}")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.columns)

    def column(self, name: str) -> list[str]:
        j = self.columns.index(name)
        return [row[j] for row in self.rows]

    def subset(self, indices: Iterable[int]) -> "FeatureTable":
        return FeatureTable(list(self.columns), [self.rows[i] for i in indices], dict(self.provenance))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            writer.writerows(self.rows)

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh, strict=True)
            header = next(reader)
            rows = [tuple(r) for r in reader]
        return cls(header, rows)


def _reject_unknown(d: Mapping[str, Any], allowed: set[str], where: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise IngestError(f"unknown key in {where} config: {extra[0]!r}")


def _parse_number(text: str) -> float | None:
    try:
        return float(text.replace(",", ""))
    except ValueError:
        return None


def load_csv(path: str | Path, config: IngestConfig) -> list[RawRecord]:
    """Parse a UTF-8, RFC-4180 CSV into records typed by the column specs.

    Sentinel strings become ``None``; numeric cells that fail to parse are
    also treated as missing. The id column is lifted out of ``fields``.
    """
    specs = config.spec_by_name
    sentinels = set(config.sentinels)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: no header row") from None
        except csv.Error as exc:
            raise IngestError(f"{path}: malformed header: {exc}") from None
        seen: set[str] = set()
        for name in header:
            if name in seen:
                raise IngestError(f"{path}: duplicated header {name!r}")
            seen.add(name)
            if name not in specs and config.other_columns == "error":
                raise IngestError(f"{path}: unknown column {name!r} (no ColumnSpec)")
        if config.id_column not in seen:
            raise IngestError(f"{path}: id column {config.id_column!r} not in header")
        kinds = [specs[n].kind if n in specs else None for n in header]
        records = []
        try:
            for row in reader:
                line = reader.line_num
                if not row:
                    continue
                if len(row) != len(header):
                    raise IngestError(f"{path}: row at line {line} has {len(row)} fields, expected {len(header)}")
                fields: dict[str, Any] = {}
                report_id = None
                for name, kind, text in zip(header, kinds, row):
                    if name == config.id_column:
                        report_id = text.strip()
                        continue
                    if kind is None:
                        continue
                    text = text.strip()
                    if text in sentinels:
                        fields[name] = None
                    elif kind == "numeric":
                        fields[name] = _parse_number(text)
                    else:
                        fields[name] = text
                if not report_id or report_id in sentinels:
                    raise IngestError(f"{path}: row at line {line} has no usable {config.id_column!r}")
                records.append(RawRecord(report_id, fields))
        except csv.Error as exc:
            raise IngestError(f"{path}: malformed CSV near line {reader.line_num}: {exc}") from None
    return records


def dedupe(records: Sequence[RawRecord]) -> list[RawRecord]:
    """Keep the first record for each report id."""
    seen: set[str] = set()
    out = []
    for rec in records:
        if rec.report_id not in seen:
            seen.add(rec.report_id)
            out.append(rec)
    return out


def drop_columns(records: Sequence[RawRecord], names: Iterable[str]) -> list[RawRecord]:
    names = set(names)
    if not names:
        return list(records)
    return [r.with_fields({k: v for k, v in r.fields.items() if k not in names}) for r in records]


def _match_level(text: str | None, keywords) -> str | None:
    if not text:
        return None
    lowered = text.lower()
    for level, patterns in keywords:
        if any(p.lower() in lowered for p in patterns):
            return level
    return None


def tag_automation_level(
    records: Sequence[RawRecord],
    *,
    version_column: str | None = None,
    narrative_column: str | None = None,
    system_column: str | None = None,
    keywords=DEFAULT_LEVEL_KEYWORDS,
    system_levels: Mapping[str, str] = DEFAULT_SYSTEM_LEVELS,
) -> list[RawRecord]:
    """Add an ``Automation Level`` column from version text, narrative, then system type.

    Keyword rules are tried in order on the version field and then on the
    narrative; the first hit wins. Rows with no keyword fall back to the
    ADS/ADAS system column, and to ``Unknown`` when that is empty too.
    """
    out = []
    for rec in records:
        f = rec.fields
        level = None
        for col in (version_column, narrative_column):
            if col is not None and level is None:
                level = _match_level(f.get(col), keywords)
        if level is None and system_column is not None:
            system = f.get(system_column)
            if system:
                level = system_levels.get(system.strip().upper())
        out.append(rec.with_fields({**f, LEVEL_COLUMN: level or UNKNOWN}))
    return out


def _parse_date(text: str) -> tuple[int, int, int | None] | None:
    for fmt in DATE_FORMATS:
        try:
            d = datetime.strptime(text, fmt)
            return d.year, d.month, d.day
        except ValueError:
            pass
    for fmt in MONTH_YEAR_FORMATS:
        try:
            d = datetime.strptime(text, fmt)
            return d.year, d.month, None
        except ValueError:
            pass
    return None


def _parse_hour(text: str) -> int | None:
    for fmt in TIME_FORMATS:
        try:
            return datetime.strptime(text, fmt).hour
        except ValueError:
            pass
    return None


def extract_temporal(
    records: Sequence[RawRecord], date_column: str | None, time_column: str | None
) -> list[RawRecord]:
    """Split incident date/time into Year, Month, Day and Hour columns.

    Year, Day and Hour are numeric (mode-imputed later); Month is a
    categorical month name. Unparseable or missing sources give missing
    cells. The source columns are removed.
    """
    out = []
    for rec in records:
        f = dict(rec.fields)
        if date_column is not None:
            raw = f.pop(date_column, None)
            parsed = _parse_date(raw) if raw else None
            year, month, day = parsed if parsed else (None, None, None)
            f["Year"] = None if year is None else float(year)
            f["Month"] = None if month is None else MONTHS[month - 1]
            f["Day"] = None if day is None else float(day)
        if time_column is not None:
            raw = f.pop(time_column, None)
            hour = _parse_hour(raw) if raw else None
            f["Hour"] = None if hour is None else float(hour)
        out.append(rec.with_fields(f))
    return out


def _mode(values: Iterable[Any]) -> Any:
    counts = Counter(v for v in values if v is not None)
    if not counts:
        return None
    top = max(counts.values())
    # Ties go to the smallest value so reruns are deterministic.
    return min(v for v, c in counts.items() if c == top)


def apply_missing_policy(
    records: Sequence[RawRecord], threshold: float = 0.5, numeric: Iterable[str] = ()
) -> tuple[list[RawRecord], dict[str, float], dict[str, dict]]:
    """Drop mostly-missing columns, then impute the rest.

    Columns whose missing fraction exceeds ``threshold`` are removed.
    Remaining numeric columns (named in ``numeric``) are filled with their
    mode; every other column gets the literal ``"Unknown"``.

    Returns the new records, ``{dropped column: missing fraction}`` and
    ``{column: {"count": n, "value": fill}}`` for columns that were imputed.
    """
    if not 0 < threshold <= 1:
        raise IngestError(f"threshold must be in (0, 1], got {threshold}")
    if not records:
        return [], {}, {}
    numeric = set(numeric)
    n = len(records)
    columns = list(records[0].fields)
    dropped: dict[str, float] = {}
    fills: dict[str, Any] = {}
    imputed: dict[str, dict] = {}
    for col in columns:
        missing = sum(1 for r in records if r.fields[col] is None)
        frac = missing / n
        if frac > threshold:
            dropped[col] = frac
            continue
        if not missing:
            continue
        if col in numeric:
            fill = _mode(r.fields[col] for r in records)
            if fill is None:
                # all-missing numeric column with threshold 1.0: no mode exists
                dropped[col] = frac
                continue
        else:
            fill = UNKNOWN
        fills[col] = fill
        imputed[col] = {"count": missing, "value": fill}
    out = []
    for rec in records:
        f = {}
        for col, v in rec.fields.items():
            if col in dropped:
                continue
            f[col] = fills[col] if v is None else v
        out.append(rec.with_fields(f))
    return out, dropped, imputed


def bin_numeric(records: Sequence[RawRecord], bins: Sequence[BinSpec]) -> list[RawRecord]:
    """Replace each binned numeric column with a ``<column> Bin`` label column.

    Missing cells stay missing. Bins whose column is absent are skipped.
    """
    if not records:
        return []
    present = [b for b in bins if b.column in records[0].fields]
    out = []
    for rec in records:
        f = {}
        for col, v in rec.fields.items():
            spec = next((b for b in present if b.column == col), None)
            if spec is None:
                f[col] = v
            else:
                f[spec.output_column] = None if v is None else spec.label(float(v))
        out.append(rec.with_fields(f))
    return out


def format_cell(value: Any) -> str:
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


def to_feature_table(records: Sequence[RawRecord], provenance: dict | None = None) -> FeatureTable:
    columns = list(records[0].fields) if records else []
    rows = []
    for rec in records:
        if any(v is None for v in rec.fields.values()):
            raise IngestError(f"report {rec.report_id!r} still has missing cells")
        rows.append(tuple(format_cell(rec.fields[c]) for c in columns))
    return FeatureTable(columns, rows, provenance or {})


def ingest(path: str | Path, config: IngestConfig) -> FeatureTable:
    """Run the full cleaning chain and return a FeatureTable with provenance."""
    records = load_csv(path, config)
    specs = config.spec_by_name
    prov: dict[str, Any] = {"raw_rows": len(records)}

    records = dedupe(records)
    prov["duplicates_removed"] = prov["raw_rows"] - len(records)

    header = [c for c in records[0].fields] if records else []
    redundant = [c for c in header if c not in specs or specs[c].role == "drop-redundant"]
    records = drop_columns(records, redundant)
    prov["dropped_redundant"] = redundant

    if config.tags_levels:
        records = tag_automation_level(
            records,
            version_column=config.version_column,
            narrative_column=config.narrative_column,
            system_column=config.system_column,
            keywords=config.level_keywords,
        )
        counts = Counter(r.fields[LEVEL_COLUMN] for r in records)
        prov["automation_levels"] = dict(sorted(counts.items()))
        before = len(records)
        excluded = set(config.exclude_levels)
        records = [r for r in records if r.fields[LEVEL_COLUMN] not in excluded]
        prov["excluded_level_rows"] = before - len(records)

    narrative = [c for c in (records[0].fields if records else []) if specs.get(c) and specs[c].kind == "narrative"]
    records = drop_columns(records, narrative)
    prov["consumed_narrative"] = narrative

    if not records:
        raise IngestError("no rows left after deduplication and level exclusion")

    records = extract_temporal(records, config.date_column, config.time_column)
    stray_timestamps = [
        c for c in records[0].fields
        if c in specs and specs[c].kind == "timestamp"
    ]
    records = drop_columns(records, stray_timestamps)

    numeric = {c for c, s in specs.items() if s.kind == "numeric"} | {"Year", "Day", "Hour"}
    records, dropped, imputed = apply_missing_policy(records, config.missing_threshold, numeric)
    prov["dropped_missing"] = {c: round(f, 6) for c, f in dropped.items()}
    prov["imputed"] = imputed

    records = bin_numeric(records, config.bins)

    engineered = []
    if config.date_column is not None:
        engineered += ["Year", "Month", "Day"]
    if config.time_column is not None:
        engineered.append("Hour")
    if config.tags_levels:
        engineered.append(LEVEL_COLUMN)
    kept = [
        c.name for c in config.columns
        if c.role == "keep" and c.kind in ("categorical", "numeric") and c.name != config.id_column
    ]
    prov["kept_spec_columns"] = kept
    prov["engineered_columns"] = engineered
    table = to_feature_table(records)
    prov["rows"], prov["columns"] = table.shape
    table.provenance = prov
    log.info("ingested %s: %d raw rows -> %d x %d", path, prov["raw_rows"], *table.shape)
    return table
