import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logtmpl.metrics import (GroupingMismatchError, SchemaError, evaluate, f_measure,
                             group_accuracy, pair_counts, read_grouping)

from oracles import group_accuracy_sets, pair_enumeration


def test_identical():
    g = {1: "a", 2: "a", 3: "b"}
    assert f_measure(g, g) == {"precision": 1.0, "recall": 1.0, "f": 1.0}
    assert group_accuracy(g, g) == 1.0


def test_split_group_f_half():
    truth = {1: "g", 2: "g", 3: "g"}
    pred = {1: "x", 2: "x", 3: "y"}
    assert pair_counts(truth, pred) == {"tp": 1, "fp": 2, "fn": 0}
    f = f_measure(truth, pred)
    assert f["precision"] == pytest.approx(1 / 3) and f["recall"] == 1.0
    assert f["f"] == pytest.approx(0.5)


def test_group_accuracy_example():
    truth = {1: "a", 2: "a", 3: "a", 4: "b", 5: "b"}
    pred = {1: "p", 2: "p", 3: "p", 4: "q", 5: "r"}
    assert group_accuracy(truth, pred) == pytest.approx(0.6)


def test_all_singletons_is_zero_without_error():
    g = {i: str(i) for i in range(5)}
    assert f_measure(g, g)["f"] == 0.0


def test_everything_merged():
    truth = {1: "a", 2: "a", 3: "b"}
    assert group_accuracy(truth, {k: "all" for k in truth}) == 0.0


def test_line_set_mismatch():
    with pytest.raises(GroupingMismatchError) as err:
        f_measure({1: "a", 2: "a"}, {1: "a", 3: "a"})
    assert err.value.only_truth == [2] and err.value.only_pred == [3]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_against_enumeration(seed):
    rng = random.Random(seed)
    n = rng.randint(0, 60)
    truth = {i: rng.randint(0, rng.randint(0, 8)) for i in range(n)}
    pred = {i: rng.randint(0, rng.randint(0, 8)) for i in range(n)}
    oracle = pair_enumeration(truth, pred)
    counts = pair_counts(truth, pred)
    assert counts == {k: oracle[k] for k in ("tp", "fp", "fn")}
    f = f_measure(truth, pred)
    for k in ("precision", "recall", "f"):
        assert f[k] == pytest.approx(oracle[k], abs=1e-12)
        assert 0.0 <= f[k] <= 1.0
    if truth:
        assert group_accuracy(truth, pred) == pytest.approx(group_accuracy_sets(truth, pred))
    relabeled = {k: f"L{v * 7 + 3}" for k, v in pred.items()}
    assert f_measure(truth, relabeled) == f


def test_evaluate_and_read(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("LineId,EventId,EventTemplate\n1,E1,a\n2,E1,a\n3,E2,b\n")
    g = read_grouping(p)
    assert g == {"1": "E1", "2": "E1", "3": "E2"}
    out = evaluate(g, g)
    assert out["f_measure"] == 1.0 and out["n_groups_truth"] == out["n_groups_pred"] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("Line,Event\n1,E1\n")
    with pytest.raises(SchemaError) as err:
        read_grouping(bad)
    assert err.value.missing == ["LineId", "EventId"]
