"""Grouping accuracy: pairwise F-measure and group accuracy.

Pair counts use the original definitions: a false positive is a pair grouped
together in the ground truth but split by the parser, a false negative a pair
grouped by the parser but split in the truth.  This is the transpose of the
usual clustering convention, so precision here is ``TP / truth-pairs``.
"""
from __future__ import annotations

import csv
from collections import Counter
from math import comb


class GroupingMismatchError(ValueError):
    def __init__(self, only_truth, only_pred):
        self.only_truth = sorted(only_truth, key=str)
        self.only_pred = sorted(only_pred, key=str)
        super().__init__(
            f"line sets differ: {len(self.only_truth)} only in truth "
            f"{self.only_truth[:10]}, {len(self.only_pred)} only in prediction "
            f"{self.only_pred[:10]}")


class SchemaError(ValueError):
    def __init__(self, path, missing):
        self.missing = missing
        super().__init__(f"{path}: missing column(s) {', '.join(missing)}")


def _check(truth: dict, pred: dict) -> None:
    if truth.keys() != pred.keys():
        raise GroupingMismatchError(truth.keys() - pred.keys(), pred.keys() - truth.keys())


def pair_counts(truth: dict, pred: dict) -> dict:
    _check(truth, pred)
    joint = Counter((truth[k], pred[k]) for k in truth)
    tp = sum(comb(c, 2) for c in joint.values())
    same_truth = sum(comb(c, 2) for c in Counter(truth.values()).values())
    same_pred = sum(comb(c, 2) for c in Counter(pred.values()).values())
    return {"tp": tp, "fp": same_truth - tp, "fn": same_pred - tp}


def _ratio(a, b):
    return a / b if b else 0.0


def f_measure(truth: dict, pred: dict) -> dict:
    c = pair_counts(truth, pred)
    precision = _ratio(c["tp"], c["tp"] + c["fp"])
    recall = _ratio(c["tp"], c["tp"] + c["fn"])
    f = _ratio(2 * precision * recall, precision + recall)
    return {"precision": precision, "recall": recall, "f": f}


def group_accuracy(truth: dict, pred: dict) -> float:
    """Share of lines whose predicted group has exactly their true group's members."""
    _check(truth, pred)
    if not truth:
        return 0.0
    joint = Counter((truth[k], pred[k]) for k in truth)
    size_t = Counter(truth.values())
    size_p = Counter(pred.values())
    correct = sum(n for (t, p), n in joint.items() if n == size_t[t] == size_p[p])
    return correct / len(truth)


def evaluate(truth: dict, pred: dict) -> dict:
    f = f_measure(truth, pred)
    return {
        "precision": f["precision"],
        "recall": f["recall"],
        "f_measure": f["f"],
        "group_accuracy": group_accuracy(truth, pred),
        "n_logs": len(truth),
        "n_groups_truth": len(set(truth.values())),
        "n_groups_pred": len(set(pred.values())),
    }


def read_grouping(path) -> dict:
    """``LineId -> EventId`` from a LogHub-style CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("LineId", "EventId") if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(path, missing)
        return {row["LineId"]: row["EventId"] for row in reader}
