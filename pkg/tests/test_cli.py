import csv
import json
import subprocess
import sys

import pytest

from crashrules.cli import main, parse_args


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out.strip(), out.err


def usage(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main([str(a) for a in argv])
    return exc.value.code, capsys.readouterr().err


def test_parse_happy_path(fixture_paths, tmp_path):
    csv_path, cfg_path = fixture_paths
    cmd = parse_args(["pipeline", "--config", str(cfg_path), "--input", str(csv_path), "--out", str(tmp_path)])
    assert cmd.verb == "pipeline" and cmd.input_path == csv_path and cmd.output_dir == tmp_path


def test_usage_errors(fixture_paths, capsys, tmp_path):
    csv_path, _ = fixture_paths
    code, err = usage(["mine", "--input", csv_path, "--min-support", "1.5"], capsys)
    assert code == 2 and "--min-support" in err
    code, err = usage(["pipeline", "--input", csv_path, "--bogus"], capsys)
    assert code == 2 and "--bogus" in err
    code, err = usage(["pipeline"], capsys)
    assert code == 2 and "--input" in err
    code, err = usage(["pipeline", "--input", tmp_path / "nope.csv"], capsys)
    assert code == 2 and "--input" in err
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text('{"schema_version": 1, "ingest": {"columns": []}, "typo": 1}')
    code, err = usage(["prepare", "--input", csv_path, "--config", bad_cfg], capsys)
    assert code == 2 and "typo" in err


def test_runtime_failure_exit_one(tmp_path, capsys):
    src = tmp_path / "in.csv"
    src.write_text("Report ID,A\n1,x\n2,y\n", encoding="utf-8")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"ingest": {"columns": [{"name": "Report ID"}, {"name": "A"}]}}))
    code, _, err = run(["cluster", "--input", src, "--config", cfg, "--k", "5", "--out", tmp_path], capsys)
    assert code == 1 and "[cluster]" in err


def test_prepare_outputs(fixture_paths, tmp_path, capsys):
    code, out, _ = run(["prepare", "--input", fixture_paths[0], "--config", fixture_paths[1], "--out", tmp_path], capsys)
    assert code == 0
    run_dir = tmp_path / out.split("/")[-1]
    assert run_dir.name.startswith("prepare-")
    for name in ("cleaned.csv", "provenance.json", "manifest.json"):
        assert (run_dir / name).is_file()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["input"]["sha256"] and manifest["config"]["seed"] == 7
    assert set(manifest["versions"]) == {"crashrules", "python", "numpy"}


def test_cluster_fixed_k(fixture_paths, tmp_path, capsys):
    code, out, _ = run(["cluster", "--input", fixture_paths[0], "--config", fixture_paths[1],
                        "--k", 4, "--seed", 7, "--out", tmp_path], capsys)
    assert code == 0
    run_dir = tmp_path / out.split("/")[-1]
    model = json.loads((run_dir / "model.json").read_text())
    assert model["k"] == 4 and model["seed"] == 7
    assert not (run_dir / "elbow.csv").exists()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["config"]["k"] == 4


def test_explore_partitions(fixture_paths, tmp_path, capsys):
    code, out, _ = run(["explore", "--input", fixture_paths[0], "--config", fixture_paths[1], "--out", tmp_path], capsys)
    assert code == 0
    exp = tmp_path / out.split("/")[-1] / "exploratory"
    for path in exp.glob("freq_*.csv"):
        with open(path, newline="") as fh:
            assert sum(int(r["count"]) for r in csv.DictReader(fh)) == 200
    with open(exp / "hour_by_month.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    assert sum(int(v) for r in rows for v in r[1:]) == 200


def test_mine_with_assignments(fixture_paths, tmp_path, capsys):
    base = ["--input", fixture_paths[0], "--config", fixture_paths[1], "--out", tmp_path]
    code, out, _ = run(["cluster", *base], capsys)
    assign = tmp_path / out.split("/")[-1] / "assignments.csv"
    code, out, _ = run(["mine", *base, "--assignments", assign], capsys)
    assert code == 0
    counts = json.loads((tmp_path / out.split("/")[-1] / "rule_counts.json").read_text())
    assert sorted(counts) == ["0", "1", "2"]


def test_pipeline_rerun_identical(fixture_paths, tmp_path, capsys):
    argv = ["pipeline", "--input", fixture_paths[0], "--config", fixture_paths[1]]
    code_a, out_a, _ = run([*argv, "--out", tmp_path / "a"], capsys)
    code_b, out_b, _ = run([*argv, "--out", tmp_path / "b"], capsys)
    assert code_a == code_b == 0
    dir_a, dir_b = tmp_path / "a" / out_a.split("/")[-1], tmp_path / "b" / out_b.split("/")[-1]
    assert dir_a.name == dir_b.name
    files = sorted(p.relative_to(dir_a) for p in dir_a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(dir_b) for p in dir_b.rglob("*") if p.is_file())
    for rel in files:
        if rel.name == "manifest.json":
            ma, mb = (json.loads((d / rel).read_text()) for d in (dir_a, dir_b))
            ma.pop("created_at"), mb.pop("created_at")
            assert ma == mb
        else:
            assert (dir_a / rel).read_bytes() == (dir_b / rel).read_bytes(), rel


def test_module_entry_point(fixture_paths, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "crashrules", "prepare", "--input", str(fixture_paths[0]), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / proc.stdout.strip().split("/")[-1] / "cleaned.csv").is_file()
