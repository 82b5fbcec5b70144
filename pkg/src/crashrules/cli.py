"""Command-line front end.

Every verb reads the raw crash CSV plus a JSON config, applies flag
overrides, and writes its outputs to ``<out>/<verb>-<config hash>/`` along
with a ``manifest.json``. Exit codes: 0 success, 1 runtime failure, 2 usage
error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from crashrules import __version__
from crashrules.encode import label_encode
from crashrules.ingest import IngestError
from crashrules.pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineError,
    _cluster,
    _ingest,
    mine_table,
    profile_clusters,
    run_pipeline,
    write_exploratory,
    write_json,
    write_report,
    write_rules,
)
from crashrules.synthetic import fixture_config

VERBS = ("prepare", "cluster", "mine", "profile", "pipeline", "explore")
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("crashrules")


@dataclass
class Command:
    verb: str
    input_path: Path
    output_dir: Path
    config_path: Path | None = None
    overrides: dict[str, Any] = field(default_factory=dict)
    assignments_path: Path | None = None


def _fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {v}")
    return v


def _nonneg(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _int_at_least(lo: int):
    def conv(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crash-rules", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")
    helps = {
        "prepare": "clean and engineer features; write cleaned.csv + provenance.json",
        "cluster": "label-encode and cluster (elbow sweep unless --k is given)",
        "mine": "mine rules on the cleaned table, whole or split by --assignments",
        "profile": "cluster and write per-cluster profiles",
        "pipeline": "run every stage and write the full report",
        "explore": "write frequency tables and the hour x month grid",
    }
    for verb in VERBS:
        p = sub.add_parser(verb, help=helps[verb])
        p.add_argument("--input", type=Path, help="raw crash CSV (required)")
        p.add_argument("--config", type=Path, help="JSON config (defaults to the bundled SGO layout)")
        p.add_argument("--out", type=Path, default=Path("runs"), help="parent of the run directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--k", type=_int_at_least(1), help="fixed cluster count; skips the elbow sweep")
        p.add_argument("--k-min", type=_int_at_least(1))
        p.add_argument("--k-max", type=_int_at_least(1))
        p.add_argument("--restarts", type=_int_at_least(1))
        p.add_argument("--scale", action="store_true", default=None, help="min-max scale label codes")
        p.add_argument("--min-support", type=_fraction)
        p.add_argument("--min-confidence", type=_fraction)
        p.add_argument("--min-lift", type=_nonneg)
        p.add_argument("--max-len", type=_int_at_least(2))
        p.add_argument("--sparse-floor", type=_nonneg)
        p.add_argument("--top-n", type=_int_at_least(0))
        p.add_argument("-v", "--verbose", action="store_true")
        if verb == "mine":
            p.add_argument("--assignments", type=Path, help="CSV of row,cluster from the cluster verb")
    return parser


def parse_args(argv: Sequence[str] | None = None) -> Command:
    parser = build_parser()
    ns, extra = parser.parse_known_args(argv)
    if extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    if ns.input is None:
        parser.error("argument --input: required")
    if not ns.input.is_file():
        parser.error(f"argument --input: file not found: {ns.input}")
    if ns.config is not None and not ns.config.is_file():
        parser.error(f"argument --config: file not found: {ns.config}")
    assignments = getattr(ns, "assignments", None)
    if assignments is not None and not assignments.is_file():
        parser.error(f"argument --assignments: file not found: {assignments}")
    if ns.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        key: getattr(ns, key)
        for key in ("seed", "k", "k_min", "k_max", "restarts", "scale", "min_support",
                    "min_confidence", "min_lift", "max_len", "sparse_floor", "top_n")
        if getattr(ns, key) is not None
    }
    cmd = Command(ns.verb, ns.input, ns.out, ns.config, overrides, assignments)
    try:
        effective_config(cmd)
    except (ConfigError, IngestError, ValueError) as exc:
        parser.error(str(exc))
    return cmd


def default_config() -> dict:
    cfg = fixture_config()
    cfg["ingest"]["other_columns"] = "drop"
    return cfg


def effective_config(cmd: Command) -> PipelineConfig:
    """Config file (or the default) with command-line overrides applied."""
    if cmd.config_path is None:
        raw = default_config()
    else:
        with open(cmd.config_path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{cmd.config_path}: invalid JSON: {exc}") from None
    o = cmd.overrides
    for key in ("seed", "k", "restarts", "scale", "sparse_floor", "top_n"):
        if key in o:
            raw[key] = o[key]
    if "k_min" in o or "k_max" in o:
        lo, hi = raw.get("k_range", [2, 10])
        raw["k_range"] = [o.get("k_min", lo), o.get("k_max", hi)]
    names = {"min_support": "min_support", "min_confidence": "min_confidence",
             "min_lift": "min_lift", "max_len": "max_length"}
    th = dict(raw.get("thresholds", {}))
    for flag, key in names.items():
        if flag in o:
            th[key] = o[flag]
    if th:
        raw["thresholds"] = th
    return PipelineConfig.from_dict(raw)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(run_dir: Path, cmd: Command, config: PipelineConfig) -> None:
    outputs = sorted(str(p.relative_to(run_dir)) for p in run_dir.rglob("*") if p.is_file() and p.name != "manifest.json")
    write_json(run_dir / "manifest.json", {
        "verb": cmd.verb,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "input": {"path": str(cmd.input_path), "sha256": sha256_file(cmd.input_path)},
        "assignments": None if cmd.assignments_path is None else {
            "path": str(cmd.assignments_path), "sha256": sha256_file(cmd.assignments_path)},
        "versions": {"crashrules": __version__, "python": platform.python_version(), "numpy": np.__version__},
        "outputs": outputs,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    })


def _read_assignments(path: Path) -> list[int]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = sorted((int(r["row"]), int(r["cluster"])) for r in reader)
    if [r for r, _ in rows] != list(range(len(rows))):
        raise PipelineError("mine", f"{path}: rows must be numbered 0..n-1 without gaps")
    return [c for _, c in rows]


def _write_assignments(path: Path, assignments) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "cluster"])
        writer.writerows(enumerate(np.asarray(assignments).tolist()))


def _run(cmd: Command, config: PipelineConfig, run_dir: Path) -> None:
    if cmd.verb == "pipeline":
        report = run_pipeline(config, cmd.input_path)
        write_report(report, run_dir)
        _write_assignments(run_dir / "assignments.csv", report.assignments)
        return

    table = _ingest(config, cmd.input_path)
    table.to_csv(run_dir / "cleaned.csv")
    write_json(run_dir / "provenance.json", table.provenance)
    if cmd.verb == "prepare":
        return
    if cmd.verb == "explore":
        write_exploratory(run_dir, table)
        return
    if cmd.verb == "mine":
        labels = None if cmd.assignments_path is None else _read_assignments(cmd.assignments_path)
        clusters = mine_table(table, config, labels)
        write_rules(run_dir, clusters)
        write_json(run_dir / "rule_counts.json", {str(c.cluster): len(c.rules) for c in clusters})
        return

    encoded = label_encode(table)
    model, curve = _cluster(config, encoded.as_points(scale=config.scale), None)
    if cmd.verb == "cluster":
        encoded.to_files(run_dir / "encoded.csv", run_dir / "dictionaries.json")
        if curve is not None:
            curve.to_csv(run_dir / "elbow.csv")
        write_json(run_dir / "model.json", model.to_dict())
        _write_assignments(run_dir / "assignments.csv", model.assignments)
        return
    profiles = profile_clusters(table, model.assignments, config.profile_columns)
    write_json(run_dir / "profiles.json", [p.to_dict() for p in profiles])


def execute(cmd: Command) -> int:
    try:
        config = effective_config(cmd)
    except (ConfigError, IngestError, ValueError) as exc:
        print(f"crash-rules: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    run_dir = cmd.output_dir / f"{cmd.verb}-{config.config_hash()[:12]}"
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        _run(cmd, config, run_dir)
        _write_manifest(run_dir, cmd, config)
    except PipelineError as exc:
        print(f"crash-rules: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, OSError) as exc:
        print(f"crash-rules: error: [{cmd.verb}] {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(run_dir)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    return execute(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
