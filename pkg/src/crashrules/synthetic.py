"""Synthetic inputs with known ground truth.

``make_blobs`` gives point clouds for exercising the elbow rule.
``make_sgo_fixture`` writes an SGO-shaped crash CSV whose rows come from
three planted crash regimes, with a handful of association rules planted
inside them. Planted rule metrics are counted directly from the generated
rows, independently of the mining code.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np



def make_blobs(
    n: int = 400,
    centers: int = 4,
    seed: int = 0,
    std: float = 1.0,
    spacing: float = 20.0,
    dim: int = 2,
) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic Gaussian blobs on a jittered grid, ``spacing`` apart."""
    rng = np.random.default_rng(seed)
    side = int(np.ceil(np.sqrt(centers)))
    grid = np.array([(i % side, i // side) for i in range(centers)], dtype=np.float64) * spacing
    if dim > 2:
        grid = np.hstack([grid, np.zeros((centers, dim - 2))])
    grid = grid[:, :dim] + rng.normal(scale=spacing * 0.05, size=(centers, dim))
    labels = np.arange(n) % centers
    rng.shuffle(labels)
    points = grid[labels] + rng.normal(scale=std, size=(n, dim))
    return points, labels


HEADER = [
    "Report ID", "Reporting Entity", "Make", "Model Year", "Mileage", "VIN",
    "Incident Date", "Incident Time", "State", "City", "Address", "Latitude", "Longitude",
    "Automation System", "ADS/ADAS Version", "Investigating Officer", "Law Enforcement Investigating?",
    "Weather", "Lighting", "Roadway Type", "Roadway Surface", "Roadway Description",
    "Source", "Highest Injury Severity Alleged", "SV Pre-Crash Movement", "CP Pre-Crash Movement",
    "SV Contact Area", "CP Contact Area", "SV Precrash Speed (MPH)", "Posted Speed Limit (MPH)",
    "Crash With", "Any Air Bags Deployed?", "Property Damage?", "Narrative",
]

COLUMN_KINDS = {
    "Model Year": "numeric",
    "Mileage": "numeric",
    "Latitude": "numeric",
    "Longitude": "numeric",
    "SV Precrash Speed (MPH)": "numeric",
    "Posted Speed Limit (MPH)": "numeric",
    "Incident Date": "timestamp",
    "Incident Time": "timestamp",
    "Narrative": "narrative",
}
REDUNDANT = {"VIN", "Address", "Latitude", "Longitude", "Investigating Officer"}

# Per-regime value pools: (values, probabilities). Regime 0 is ADAS highway
# driving, 1 is ADS robotaxi service in dense cities, 2 is ADAS suburban.
REGIMES = [
    {
        "entity": (["Tesla, Inc.", "Ford Motor Company"], [0.85, 0.15]),
        "state": (["TX", "FL"], [0.6, 0.4]),
        "city": (["Austin", "Dallas", "Houston", "Miami"], [0.3, 0.25, 0.25, 0.2]),
        "system": "ADAS",
        "version": (["2023.44.30", "0", "2024.2.9"], [0.4, 0.3, 0.3]),
        "roadway_type": (["Highway / Freeway"], [1.0]),
        "hours": list(range(14, 20)),
        "years": ([2021, 2022], [0.5, 0.5]),
        "speed": (55, 85),
        "limit": ([55, 65, 70], [0.3, 0.5, 0.2]),
        "mileage": (30_000, 90_000),
        "model_year": ([2019, 2020, 2021], [0.3, 0.4, 0.3]),
        "source": (["Telematics", "Complaint/Claim"], [0.8, 0.2]),
        "sv_move": (["Proceeding Straight", "Changing Lanes"], [0.8, 0.2]),
        "cp_move": (["Proceeding Straight", "Changing Lanes", "Stopped"], [0.5, 0.3, 0.2]),
        "roadway_desc": (["No Unusual Conditions", "Work Zone"], [0.85, 0.15]),
        "injury": (["Minor", "Moderate", "No Injuries Reported", "Unknown"], [0.35, 0.2, 0.3, 0.15]),
        "months": ["April", "August", "December", "February"],
        "rain": 0.30,
    },
    {
        "entity": (["Waymo LLC", "Zoox, Inc."], [0.75, 0.25]),
        "state": (["CA", "AZ"], [0.7, 0.3]),
        "city": (["San Francisco", "Phoenix", "Santa Monica"], [0.5, 0.3, 0.2]),
        "system": "ADS",
        "version": (["5th Gen", "4th Gen", ""], [0.5, 0.3, 0.2]),
        "roadway_type": (["Intersection", "Street"], [0.5, 0.5]),
        "hours": list(range(3, 10)),
        "years": ([2023, 2024], [0.5, 0.5]),
        "speed": (0, 12),
        "limit": ([25, 30, 35], [0.4, 0.4, 0.2]),
        "mileage": (0, 25_000),
        "model_year": ([2022, 2023], [0.5, 0.5]),
        "source": (["Telematics", "Media"], [0.9, 0.1]),
        "sv_move": (["Stopped", "Proceeding Straight", "Making Left Turn"], [0.4, 0.35, 0.25]),
        "cp_move": (["Proceeding Straight", "Backing", "Making Right Turn"], [0.5, 0.2, 0.3]),
        "roadway_desc": (["No Unusual Conditions"], [1.0]),
        "injury": (None, None),  # set by the planted stopped -> no-injury rule
        "months": ["January", "July", "June", "March"],
        "rain": 0.12,
    },
    {
        "entity": (["Honda (American Honda Motor Co.)", "Hyundai Motor America", "Subaru of America"], [0.5, 0.3, 0.2]),
        "state": (["WA"], [1.0]),
        "city": (["Seattle", "Spokane", "Tacoma"], [0.5, 0.2, 0.3]),
        "system": "ADAS",
        "version": (["Level 2", "Honda Sensing Level 2", "HDA2 Level 2"], [0.5, 0.3, 0.2]),
        "roadway_type": (["Parking Lot", "Street"], [0.4, 0.6]),
        "hours": [0, 1, 10, 11, 12, 13],
        "years": ([2022, 2023, 2024], [0.3, 0.4, 0.3]),
        "speed": (15, 45),
        "limit": ([25, 35, 45], [0.3, 0.4, 0.3]),
        "mileage": (5_000, 40_000),
        "model_year": ([2020, 2021, 2022], [0.3, 0.4, 0.3]),
        "source": (["Complaint/Claim", "Law Enforcement"], [0.6, 0.4]),
        "sv_move": (None, None),  # set by the planted parking-lot backing rule
        "cp_move": (["Stopped", "Parked"], [0.6, 0.4]),
        "roadway_desc": (["No Unusual Conditions", "Traffic Incident"], [0.8, 0.2]),
        "injury": (["No Injuries Reported", "Minor"], [0.7, 0.3]),
        "months": ["May", "November", "October", "September"],
        "rain": 0.03,
    },
]

CRASH_WITH = ["Passenger Car", "SUV", "Pickup Truck", "Other Fixed Object"]
CONTACT = ["Front", "Rear", "Left", "Right"]
MAKE = {
    "Tesla, Inc.": "Tesla",
    "Ford Motor Company": "Ford",
    "Waymo LLC": "Jaguar",
    "Zoox, Inc.": "Zoox",
    "Honda (American Honda Motor Co.)": "Honda",
    "Hyundai Motor America": "Hyundai",
    "Subaru of America": "Subaru",
}


@dataclass(frozen=True)
class PlantedRule:
    regime: int
    antecedent: tuple[str, ...]
    consequent: tuple[str, ...]


PLANTED_RULES = [
    PlantedRule(0, ("Weather=Rain",), ("Roadway Surface=Wet",)),
    PlantedRule(1, ("Weather=Rain",), ("Roadway Surface=Wet",)),
    PlantedRule(2, ("Weather=Rain",), ("Roadway Surface=Wet",)),
    PlantedRule(0, ("Lighting=Dark - Lighted",), ("Crash With=Other Fixed Object",)),
    PlantedRule(1, ("SV Pre-Crash Movement=Stopped",), ("Highest Injury Severity Alleged=No Injuries Reported",)),
    PlantedRule(2, ("Roadway Type=Parking Lot", "SV Pre-Crash Movement=Backing"), ("SV Contact Area=Rear",)),
]


@dataclass
class PlantedMetrics:
    rule: PlantedRule
    support: float
    confidence: float
    lift: float
    count: int
    n: int


@dataclass
class Fixture:
    csv_text: str
    regimes: list[int]  # regime of each unique, non-excluded row, in file order
    planted: list[PlantedMetrics] = field(default_factory=list)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.csv_text, encoding="utf-8")


def _pick(rng: np.random.Generator, pool):
    values, probs = pool
    return values[int(rng.choice(len(values), p=probs))]


def _row(rng: np.random.Generator, regime: int, report_id: str) -> dict[str, str]:
    spec = REGIMES[regime]
    entity = _pick(rng, spec["entity"])
    year = _pick(rng, spec["years"])
    month = spec["months"][int(rng.integers(len(spec["months"])))]
    rain = rng.random() < spec["rain"]
    weather = "Rain" if rain else _pick(rng, (["Clear", "Cloudy"], [0.7, 0.3]))
    surface = "Wet" if rain else _pick(rng, (["Dry", "Unknown"], [0.9, 0.1]))
    lighting = _pick(rng, (["Daylight", "Dark - Lighted", "Dawn / Dusk"], [0.6, 0.3, 0.1]))
    roadway_type = _pick(rng, spec["roadway_type"])

    if regime == 0 and lighting == "Dark - Lighted":
        crash_with = "Other Fixed Object" if rng.random() < 0.85 else _pick(rng, (CRASH_WITH[:3], [0.5, 0.3, 0.2]))
    elif rng.random() < 0.05:
        crash_with = "Other Fixed Object"
    else:
        crash_with = _pick(rng, (CRASH_WITH[:3], [0.5, 0.3, 0.2]))

    if spec["sv_move"][0] is None:
        backing_p = 0.7 if roadway_type == "Parking Lot" else 0.1
        sv_move = "Backing" if rng.random() < backing_p else _pick(rng, (["Proceeding Straight", "Making Right Turn"], [0.6, 0.4]))
    else:
        sv_move = _pick(rng, spec["sv_move"])

    if regime == 2 and roadway_type == "Parking Lot" and sv_move == "Backing":
        sv_contact = "Rear" if rng.random() < 0.95 else "Left"
    elif regime == 2:
        sv_contact = "Rear" if rng.random() < 0.1 else _pick(rng, (["Front", "Left", "Right"], [0.6, 0.2, 0.2]))
    else:
        sv_contact = _pick(rng, (CONTACT, [0.4, 0.3, 0.15, 0.15]))

    if spec["injury"][0] is None:
        p = 0.9 if sv_move == "Stopped" else 0.4
        injury = "No Injuries Reported" if rng.random() < p else _pick(rng, (["Minor", "Unknown"], [0.7, 0.3]))
    else:
        injury = _pick(rng, spec["injury"])

    lo, hi = spec["speed"]
    speed = int(rng.integers(lo, hi + 1))
    if regime == 1 and sv_move == "Stopped":
        speed = 0
    mlo, mhi = spec["mileage"]
    mileage = int(rng.integers(mlo // 100, mhi // 100 + 1)) * 100
    hour = spec["hours"][int(rng.integers(len(spec["hours"])))]
    minute = int(rng.integers(60))
    version = _pick(rng, spec["version"])
    narrative = f"On {month} X, {year}, the subject vehicle was {sv_move.lower()} when contact occurred."
    airbags = "Yes" if (speed > 40 and rng.random() < 0.5) else "No"
    return {
        "Report ID": report_id,
        "Reporting Entity": entity,
        "Make": MAKE[entity],
        "Model Year": str(_pick(rng, spec["model_year"])),
        "Mileage": "" if rng.random() < 0.08 else str(mileage),
        "VIN": f"VIN{int(rng.integers(10**9)):09d}",
        "Incident Date": f"{month[:3].upper()}-{year}",
        "Incident Time": f"{hour:02d}:{minute:02d}:00",
        "State": _pick(rng, spec["state"]),
        "City": _pick(rng, spec["city"]),
        "Address": f"{int(rng.integers(1, 9999))} Main St",
        "Latitude": f"{rng.uniform(25, 48):.4f}",
        "Longitude": f"{rng.uniform(-123, -80):.4f}",
        "Automation System": spec["system"],
        "ADS/ADAS Version": version,
        "Investigating Officer": "" if rng.random() < 0.5 else f"Officer {int(rng.integers(100))}",
        "Law Enforcement Investigating?": "" if rng.random() < 0.6 else _pick(rng, (["Yes", "No"], [0.5, 0.5])),
        "Weather": weather,
        "Lighting": lighting,
        "Roadway Type": roadway_type,
        "Roadway Surface": surface,
        "Roadway Description": _pick(rng, spec["roadway_desc"]),
        "Source": _pick(rng, spec["source"]),
        "Highest Injury Severity Alleged": injury,
        "SV Pre-Crash Movement": sv_move,
        "CP Pre-Crash Movement": _pick(rng, spec["cp_move"]),
        "SV Contact Area": sv_contact,
        "CP Contact Area": _pick(rng, (CONTACT, [0.4, 0.3, 0.15, 0.15])),
        "SV Precrash Speed (MPH)": str(speed),
        "Posted Speed Limit (MPH)": "" if rng.random() < 0.05 else str(_pick(rng, spec["limit"])),
        "Crash With": crash_with,
        "Any Air Bags Deployed?": airbags,
        "Property Damage?": _pick(rng, (["Yes", "No"], [0.8, 0.2])),
        "Narrative": narrative,
    }


def _level3_row(rng: np.random.Generator, report_id: str) -> dict[str, str]:
    row = _row(rng, 0, report_id)
    row.update({
        "Reporting Entity": "Mercedes-Benz USA",
        "Make": "Mercedes-Benz",
        "Automation System": "ADS",
        "ADS/ADAS Version": "DRIVE PILOT Level 3",
    })
    return row


def _count(rows: list[dict[str, str]], items: tuple[str, ...]) -> int:
    pairs = [tuple(item.split("=", 1)) for item in items]
    return sum(all(r[c] == v for c, v in pairs) for r in rows)


def planted_metrics(rows: list[dict[str, str]], regimes: list[int]) -> list[PlantedMetrics]:
    out = []
    for rule in PLANTED_RULES:
        sub = [r for r, g in zip(rows, regimes) if g == rule.regime]
        n = len(sub)
        both = _count(sub, rule.antecedent + rule.consequent)
        ante = _count(sub, rule.antecedent)
        cons = _count(sub, rule.consequent)
        sup = both / n
        conf = both / ante if ante else 0.0
        lift = conf / (cons / n) if cons else 0.0
        out.append(PlantedMetrics(rule, sup, conf, lift, both, n))
    return out


def make_sgo_fixture(n: int = 200, seed: int = 2024, duplicates: int = 6, level3: int = 4) -> Fixture:
    """SGO-shaped crash CSV with ``n`` usable rows from three planted regimes.

    Extra rows appended after the core ``n``: ``duplicates`` exact repeats of
    earlier report ids and ``level3`` Level-3 reports, all of which ingest
    removes.
    """
    rng = np.random.default_rng(seed)
    regimes = [i % 3 for i in range(n)]
    rng.shuffle(regimes)
    rows = [_row(rng, g, f"{30000 + i}") for i, g in enumerate(regimes)]
    extra = [dict(rows[int(i)]) for i in rng.choice(n, size=duplicates, replace=False)]
    extra += [_level3_row(rng, f"{40000 + i}") for i in range(level3)]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows + extra)
    return Fixture(buf.getvalue(), list(regimes), planted_metrics(rows, regimes))


def fixture_config(seed: int = 7) -> dict:
    """Pipeline config (JSON-ready) matching :data:`HEADER`."""
    columns = []
    for name in HEADER:
        spec = {"name": name, "kind": COLUMN_KINDS.get(name, "categorical")}
        if name in REDUNDANT:
            spec["role"] = "drop-redundant"
        columns.append(spec)
    return {
        "schema_version": 1,
        "ingest": {
            "columns": columns,
            "id_column": "Report ID",
            "date_column": "Incident Date",
            "time_column": "Incident Time",
            "narrative_column": "Narrative",
            "version_column": "ADS/ADAS Version",
            "system_column": "Automation System",
            "missing_threshold": 0.5,
            "bins": [
                {"column": "SV Precrash Speed (MPH)", "preset": "speed", "output": "Speed Bin"},
                {"column": "Mileage", "preset": "mileage", "output": "Mileage Bin"},
                {"column": "Posted Speed Limit (MPH)", "preset": "tens", "output": "Speed Limit Bin"},
            ],
        },
        "k_range": [2, 10],
        "seed": seed,
        "restarts": 10,
        "thresholds": {"min_support": 0.05, "min_confidence": 0.6, "min_lift": 1.2, "max_length": 3},
        "top_n": 10,
    }


def write_fixture(directory: str | Path, n: int = 200, seed: int = 2024) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / "sgo_fixture.csv"
    cfg_path = directory / "sgo_fixture_config.json"
    make_sgo_fixture(n, seed).write(csv_path)
    cfg_path.write_text(json.dumps(fixture_config(), indent=2) + "\n", encoding="utf-8")
    return csv_path, cfg_path


def bundled_fixture() -> tuple[Path, Path]:
    """Paths of the shipped 200-row fixture CSV and its config."""
    data = Path(__file__).parent / "data"
    return data / "sgo_fixture.csv", data / "sgo_fixture_config.json"
