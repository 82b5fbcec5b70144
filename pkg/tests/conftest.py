import csv
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from crashrules.ingest import ColumnSpec, IngestConfig  # noqa: E402
from crashrules.synthetic import bundled_fixture  # noqa: E402


@pytest.fixture
def write_csv(tmp_path):
    def _write(header, rows, name="data.csv"):
        path = tmp_path / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        return path
    return _write


@pytest.fixture
def simple_config():
    """Ingest config for small hand-made tables keyed by Report ID."""
    def _make(columns: dict[str, str], **kwargs):
        specs = [ColumnSpec("Report ID")] + [ColumnSpec(n, k) for n, k in columns.items()]
        kwargs.setdefault("exclude_levels", ())
        return IngestConfig(columns=tuple(specs), **kwargs)
    return _make


@pytest.fixture(scope="session")
def fixture_paths():
    return bundled_fixture()


@pytest.fixture(scope="session")
def fixture_config_dict(fixture_paths):
    return json.loads(fixture_paths[1].read_text(encoding="utf-8"))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
