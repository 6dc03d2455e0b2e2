"""Hyperparameter sweeps and the figures/tables written next to bench and sweep runs."""
from __future__ import annotations

import csv
import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import evaluate  # noqa: E402
from .pipeline import ParseConfig, Parser  # noqa: E402

SWEEP_GRID = {
    "k": (5, 10, 15),
    "tau": (0.1, 0.5, 0.9),
    "theta": (3.5, 4.0, 4.5, 5.0, 5.5),
}
SWEEP_COLUMNS = ["param", "value", "k", "tau", "theta", "precision", "recall", "f_measure",
                 "group_accuracy", "n_templates", "n_groups_pred"]


def run_sweep(corpus, base: ParseConfig | None = None, grid=None) -> list:
    """Vary one parameter at a time around ``base``; one row per setting."""
    base = base or ParseConfig()
    grid = grid or SWEEP_GRID
    rows = []
    for param, values in grid.items():
        for value in values:
            config = base.with_(**{param: value})
            parser = Parser(config, corpus.keywords)
            pred = {r.line_no: r.template_id for r in parser.parse_lines(corpus.lines)}
            truth = {n: corpus.truth[n] for n in pred}
            m = evaluate(truth, pred)
            rows.append({"param": param, "value": value, "k": config.k, "tau": config.tau,
                         "theta": config.theta, "precision": m["precision"],
                         "recall": m["recall"], "f_measure": m["f_measure"],
                         "group_accuracy": m["group_accuracy"],
                         "n_templates": len(parser.library), "n_groups_pred": m["n_groups_pred"]})
    return rows


def write_rows(rows, path, columns) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: row[c] for c in columns})


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def _save(fig, path) -> None:
    # no Software/date metadata, so reruns produce the same bytes
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_sweep(rows, path) -> None:
    params = list(dict.fromkeys(r["param"] for r in rows))
    fig, axes = plt.subplots(1, len(params), figsize=(4 * len(params), 3.4), squeeze=False)
    for ax, param in zip(axes[0], params):
        sub = [r for r in rows if r["param"] == param]
        xs = [r["value"] for r in sub]
        ax.plot(xs, [r["f_measure"] for r in sub], "o-", label="F-measure")
        ax.plot(xs, [r["group_accuracy"] for r in sub], "s--", label="GA")
        ax.set_xlabel(param)
        ax.set_ylim(0, 1.05)
        ax.set_xticks(xs)
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("score")
    axes[0][0].legend(loc="lower left")
    fig.tight_layout()
    _save(fig, path)


def plot_bench(report: dict, path) -> None:
    runs = report["runs"]
    names = list(runs)
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    for x, name in enumerate(names):
        reps = runs[name]["reps"]
        ax.bar(x, runs[name]["mean_seconds"], color="0.75", edgecolor="k", width=0.6)
        ax.plot([x] * len(reps), reps, "k.", ms=5)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names)
    ax.set_ylabel("seconds per run")
    corpus = report["corpus"]
    ax.set_title(f"{corpus['n_templates']} templates, {corpus['n_logs']} logs")
    fig.tight_layout()
    _save(fig, path)
