import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from crashrules.arm import support
from crashrules.encode import LabelEncodedMatrix, TransactionSet, label_encode, one_hot
from crashrules.ingest import FeatureTable

SEVERITIES = ["Fatality", "Minor", "Moderate", "No Injuries Reported", "Serious", "Unknown"]


def table(**cols):
    names = list(cols)
    return FeatureTable(names, list(zip(*cols.values())))


def test_label_codes_lexicographic():
    enc = label_encode(table(Surface=["Dry", "Wet", "Dry"]))
    assert enc.dictionaries == [["Dry", "Wet"]]
    assert enc.codes[:, 0].tolist() == [0, 1, 0]


def test_single_category_all_zero():
    enc = label_encode(table(A=["x"] * 4))
    assert enc.codes.tolist() == [[0]] * 4


def test_label_first_seen_order_ignored():
    enc = label_encode(table(A=["b", "a", "c"]))
    assert enc.dictionaries[0] == ["a", "b", "c"]
    assert enc.codes[:, 0].tolist() == [1, 0, 2]


def test_label_files_round_trip(tmp_path):
    t = table(A=["b", "a", "b"], B=["z", "z", "y"])
    enc = label_encode(t)
    enc.to_files(tmp_path / "c.csv", tmp_path / "d.json")
    back = LabelEncodedMatrix.from_files(tmp_path / "c.csv", tmp_path / "d.json")
    assert back.decode().rows == t.rows
    assert np.array_equal(back.codes, enc.codes)


def test_min_max_scaling():
    enc = label_encode(table(A=["a", "b", "c"], B=["x", "x", "x"]))
    pts = enc.as_points(scale=True)
    assert pts[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert pts[:, 1].tolist() == [0.0, 0.0, 0.0]


def test_one_hot_small_example():
    ts = one_hot(table(A=["x", "y"], B=["p", "p"]))
    assert ts.items == ["A=x", "A=y", "B=p"]
    assert ts.matrix[0].astype(int).tolist() == [1, 0, 1]


def test_one_hot_six_severities():
    col = "Highest Injury Severity Alleged"
    ts = one_hot(table(**{col: SEVERITIES * 2}))
    assert len(ts.items) == 6
    assert ts.matrix.sum(axis=1).tolist() == [1] * 12


def test_transactions_csv_round_trip(tmp_path):
    ts = TransactionSet.from_itemsets([{"a", "b"}, {"b"}, set()])
    ts.to_csv(tmp_path / "t.csv")
    back = TransactionSet.from_csv(tmp_path / "t.csv")
    assert back.items == ts.items and np.array_equal(back.matrix, ts.matrix)


tables = st.integers(1, 4).flatmap(
    lambda ncol: st.lists(
        st.tuples(*[st.sampled_from(["a", "b", "c", "Unknown"]) for _ in range(ncol)]),
        min_size=1, max_size=30,
    ).map(lambda rows: FeatureTable([f"c{j}" for j in range(ncol)], rows))
)


@given(tables)
def test_label_decode_round_trip(t):
    enc = label_encode(t)
    assert enc.decode().rows == t.rows
    for j, d in enumerate(enc.dictionaries):
        assert d == sorted(d)
        assert ((0 <= enc.codes[:, j]) & (enc.codes[:, j] < len(d))).all()


@given(tables)
def test_one_hot_partition_and_support(t):
    ts = one_hot(t)
    assert len(ts.items) == sum(len(set(t.column(c))) for c in t.columns)
    for col in t.columns:
        group = [i for i, name in enumerate(ts.items) if name.split("=", 1)[0] == col]
        assert (ts.matrix[:, group].sum(axis=1) == 1).all()
    n = len(t.rows)
    for i, name in enumerate(ts.items):
        col, val = name.split("=", 1)
        assert support([i], ts) == t.column(col).count(val) / n
